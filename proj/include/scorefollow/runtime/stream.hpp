#pragma once

// Streaming contract between an audio source and the follower: a source
// pushes sample chunks of any size, a consumer pops them in FIFO order and
// re-blocks them into overlapping analysis windows. Only a buffer/file-backed
// source ships; a device source would push through the same queue.

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "scorefollow/features.hpp"

namespace scorefollow {

/// Re-blocks `chunks` into analysis windows of `window` samples spaced by
/// `hop`. The frame sequence does not depend on how the signal was chunked.
inline std::vector<std::vector<double>> stream_source(std::span<const std::vector<double>> chunks,
                                                      std::size_t window, std::size_t hop) {
  FrameBlocker blocker(window, hop);
  std::vector<std::vector<double>> frames;
  for (const auto& c : chunks)
    blocker.push(c, [&](std::span<const double> w) { frames.emplace_back(w.begin(), w.end()); });
  return frames;
}

/// Unbounded single-producer / single-consumer FIFO. push() only takes the
/// lock long enough to append, so the producer is never held up by a slow
/// consumer; nothing is dropped.
template <class T>
class FrameQueue {
public:
  void push(T item) {
    {
      std::lock_guard lock(m_);
      q_.push_back(std::move(item));
    }
    cv_.notify_one();
  }

  /// Marks end of stream; pop() drains what is left, then returns nullopt.
  void close() {
    {
      std::lock_guard lock(m_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::optional<T> pop() {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return !q_.empty() || closed_; });
    if (q_.empty())
      return std::nullopt;
    T item = std::move(q_.front());
    q_.pop_front();
    return item;
  }

  std::optional<T> try_pop() {
    std::lock_guard lock(m_);
    if (q_.empty())
      return std::nullopt;
    T item = std::move(q_.front());
    q_.pop_front();
    return item;
  }

  std::size_t size() const {
    std::lock_guard lock(m_);
    return q_.size();
  }

private:
  mutable std::mutex m_;
  std::condition_variable cv_;
  std::deque<T> q_;
  bool closed_ = false;
};

/// Source backed by an in-memory buffer (typically a decoded file): emits
/// the samples in fixed-size chunks, like an audio callback would.
class BufferSource {
public:
  BufferSource(std::span<const double> samples, std::size_t chunk) : samples_(samples), chunk_(chunk) {
    if (chunk == 0)
      throw ConfigError("BufferSource: chunk size must be positive");
  }

  /// Next chunk, or an empty span at end of stream.
  std::span<const double> next() {
    const std::size_t n = std::min(chunk_, samples_.size() - pos_);
    auto out = samples_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  /// Pushes every chunk into `queue`, then closes it.
  void drain_into(FrameQueue<std::vector<double>>& queue) {
    for (auto c = next(); !c.empty(); c = next())
      queue.push(std::vector<double>(c.begin(), c.end()));
    queue.close();
  }

private:
  std::span<const double> samples_;
  std::size_t chunk_;
  std::size_t pos_ = 0;
};

}  // namespace scorefollow
