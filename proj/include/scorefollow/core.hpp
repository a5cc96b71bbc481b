#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace scorefollow {

/// Raised when a caller violates an operation's precondition.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for inconsistent configuration (e.g. mismatched sample rates).
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised by file parsers. `offset()` is the byte position of the fault when
/// the parser knows it, otherwise npos.
class ParseError : public std::runtime_error {
public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit ParseError(const std::string& what, std::size_t offset = npos)
      : std::runtime_error(offset == npos ? what : what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

/// Sample rate / frame rate pair. The hop is derived, never stored.
class FrameClock {
public:
  constexpr FrameClock() = default;
  FrameClock(double sample_rate, double frame_rate) : sample_rate_(sample_rate), frame_rate_(frame_rate) {
    if (!(sample_rate > 0.0) || !(frame_rate > 0.0))
      throw InputError("FrameClock: sample_rate and frame_rate must be positive");
    if (sample_rate / frame_rate < 1.0)
      throw InputError("FrameClock: frame_rate exceeds sample_rate");
  }

  constexpr double sample_rate() const noexcept { return sample_rate_; }
  constexpr double frame_rate() const noexcept { return frame_rate_; }
  constexpr double frame_period() const noexcept { return 1.0 / frame_rate_; }
  /// Samples per frame, rounded to the nearest integer (1470 at 44.1 kHz / 30 fps).
  std::size_t hop() const noexcept { return static_cast<std::size_t>(std::lround(sample_rate_ / frame_rate_)); }

  friend constexpr bool operator==(const FrameClock&, const FrameClock&) = default;

private:
  double sample_rate_ = 44100.0;
  double frame_rate_ = 30.0;
};

/// floor(t * frame_rate). Negative times are rejected.
inline std::size_t time_to_frame(double t, const FrameClock& clock) {
  if (!(t >= 0.0))
    throw InputError("time_to_frame: negative or NaN time");
  const double fr = clock.frame_rate();
  auto n = static_cast<std::size_t>(std::floor(t * fr));
  // Snap against the inverse map so time_to_frame(frame_to_time(k)) == k
  // despite rounding in k / fr * fr.
  if (static_cast<double>(n + 1) / fr <= t)
    ++n;
  else if (n > 0 && static_cast<double>(n) / fr > t)
    --n;
  return n;
}

inline double frame_to_time(std::size_t frame, const FrameClock& clock) noexcept {
  return static_cast<double>(frame) / clock.frame_rate();
}

/// Mono samples tagged with their rate.
struct AudioBuffer {
  std::vector<double> samples;
  double sample_rate = 44100.0;

  double duration() const noexcept { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Time-major matrix of feature vectors sampled at `clock.frame_rate()`.
class FeatureMatrix {
public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t dim, FrameClock clock) : dim_(dim), clock_(clock) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return data_.empty(); }
  const FrameClock& clock() const noexcept { return clock_; }

  std::span<const double> operator[](std::size_t frame) const noexcept {
    return {data_.data() + frame * dim_, dim_};
  }

  void push_back(std::span<const double> frame) {
    if (frame.size() != dim_)
      throw InputError("FeatureMatrix: frame has wrong dimension");
    for (double v : frame)
      if (!std::isfinite(v))
        throw InputError("FeatureMatrix: non-finite feature value");
    data_.insert(data_.end(), frame.begin(), frame.end());
  }

  void reserve(std::size_t frames) { data_.reserve(frames * dim_); }
  const std::vector<double>& raw() const noexcept { return data_; }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

private:
  std::size_t dim_ = 0;
  FrameClock clock_{};
  std::vector<double> data_;
};

/// One correspondence between a reference frame `u` and a performance frame `v`.
struct PathPair {
  std::size_t u = 0;
  std::size_t v = 0;
  friend constexpr bool operator==(const PathPair&, const PathPair&) = default;
};

/// Pairs in emission order. `v` never decreases; `u` may repeat, skip, and
/// (for the backward-correcting follower) decrease.
class WarpingPath {
public:
  WarpingPath() = default;
  explicit WarpingPath(std::vector<PathPair> pairs) {
    for (const auto& p : pairs)
      push_back(p);
  }

  void push_back(PathPair p) {
    if (!pairs_.empty() && p.v < pairs_.back().v)
      throw InputError("WarpingPath: performance index must not decrease");
    pairs_.push_back(p);
  }

  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  const PathPair& operator[](std::size_t i) const noexcept { return pairs_[i]; }
  const PathPair& back() const { return pairs_.back(); }
  auto begin() const noexcept { return pairs_.begin(); }
  auto end() const noexcept { return pairs_.end(); }
  const std::vector<PathPair>& pairs() const noexcept { return pairs_; }

  bool reference_monotone() const noexcept {
    return std::is_sorted(pairs_.begin(), pairs_.end(),
                          [](const PathPair& a, const PathPair& b) { return a.u < b.u; });
  }

  friend bool operator==(const WarpingPath&, const WarpingPath&) = default;

private:
  std::vector<PathPair> pairs_;
};

struct BeatEntry {
  double beat = 0.0;  // 0-based beat count (integral for grids)
  double time = 0.0;  // seconds on the grid's axis
  friend constexpr bool operator==(const BeatEntry&, const BeatEntry&) = default;
};

/// Beat index <-> time on one axis. Both columns strictly increase.
class BeatGrid {
public:
  BeatGrid() = default;
  explicit BeatGrid(std::vector<BeatEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 1; i < entries_.size(); ++i)
      if (!(entries_[i].beat > entries_[i - 1].beat) || !(entries_[i].time > entries_[i - 1].time))
        throw InputError("BeatGrid: beats and times must be strictly increasing");
  }

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const BeatEntry& operator[](std::size_t i) const noexcept { return entries_[i]; }
  const std::vector<BeatEntry>& entries() const noexcept { return entries_; }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  /// Time of an exact beat value, interpolated the same way as interp_beat
  /// but in the opposite direction.
  double time_of(double beat) const;

  friend bool operator==(const BeatGrid&, const BeatGrid&) = default;

private:
  std::vector<BeatEntry> entries_;
};

namespace detail {
// Piecewise-linear map through (xs[i], ys[i]) with linear extrapolation from
// the nearest segment.
template <class XOf, class YOf>
double piecewise_linear(const std::vector<BeatEntry>& e, double x, XOf xof, YOf yof) {
  std::size_t hi = 1;
  if (x >= xof(e.back())) {
    hi = e.size() - 1;
  } else if (x > xof(e.front())) {
    auto it = std::upper_bound(e.begin(), e.end(), x,
                               [&](double val, const BeatEntry& be) { return val < xof(be); });
    hi = static_cast<std::size_t>(it - e.begin());
  }
  const BeatEntry& a = e[hi - 1];
  const BeatEntry& b = e[hi];
  const double slope = (yof(b) - yof(a)) / (xof(b) - xof(a));
  return yof(a) + slope * (x - xof(a));
}
}  // namespace detail

/// Fractional beat position at time `t`: piecewise-linear between grid knots,
/// extrapolated with the slope of the nearest segment outside the grid.
inline double interp_beat(const BeatGrid& grid, double t) {
  if (grid.size() < 2)
    throw InputError("interp_beat: grid needs at least two entries");
  return detail::piecewise_linear(
      grid.entries(), t, [](const BeatEntry& e) { return e.time; }, [](const BeatEntry& e) { return e.beat; });
}

inline double BeatGrid::time_of(double beat) const {
  if (entries_.size() < 2)
    throw InputError("BeatGrid::time_of: grid needs at least two entries");
  return detail::piecewise_linear(
      entries_, beat, [](const BeatEntry& e) { return e.beat; }, [](const BeatEntry& e) { return e.time; });
}

}  // namespace scorefollow
