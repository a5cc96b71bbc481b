#pragma once

// On-line time warping followers. Both consume one performance frame per
// step against a precomputed reference and keep memory bounded by their
// window parameters, independent of how long the performance runs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "scorefollow/align/cost.hpp"
#include "scorefollow/core.hpp"

namespace scorefollow {

struct OltwConfig {
  /// Band length in frames along each axis (Dixon variant).
  std::size_t window_size = 300;
  /// Maximum consecutive steps in one direction.
  std::size_t max_run_count = 3;
  /// Arzt variant: how many reference frames behind the pointer are
  /// re-evaluated each step.
  std::size_t backtrack = 100;
  /// Arzt variant: reference frames computed ahead of the pointer.
  std::size_t lookahead = 100;
  /// Dixon variant: accumulated-cost slack within which an earlier
  /// reference frame is preferred for the reported estimate. The default
  /// only absorbs rounding, so exact ties resolve to the earlier frame.
  double estimate_margin = 1e-9;
  CostMetric metric = CostMetric::cosine;

  void validate() const {
    if (window_size < 2)
      throw ConfigError("OltwConfig: window_size must be at least 2");
    if (max_run_count == 0)
      throw ConfigError("OltwConfig: max_run_count must be positive");
    if (lookahead < max_run_count)
      throw ConfigError("OltwConfig: lookahead must cover max_run_count");
    if (!(estimate_margin >= 0.0) || !std::isfinite(estimate_margin))
      throw ConfigError("OltwConfig: estimate_margin must be finite and non-negative");
  }
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline bool is_zero(std::span<const double> x) noexcept {
  return std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
}

/// Bookkeeping shared by all followers: emitted path, step count, and the
/// start gate that holds at reference frame 0 while the performance is still
/// silent (all-zero feature vectors) before its first sound.
class FollowerCore {
public:
  explicit FollowerCore(std::shared_ptr<const FeatureMatrix> reference) : ref_(std::move(reference)) {
    if (!ref_ || ref_->empty())
      throw InputError("follower: reference features are empty");
  }

  const FeatureMatrix& reference() const noexcept { return *ref_; }
  const WarpingPath& path() const noexcept { return path_; }
  std::size_t steps() const noexcept { return steps_; }
  bool finished() const noexcept { return finished_; }

  WarpingPath finalize() const {
    if (steps_ == 0)
      throw InputError("finalize: follower has not consumed any frame");
    return path_;
  }

protected:
  void check_frame(std::span<const double> frame) const {
    if (frame.size() != ref_->dim())
      throw InputError("follower: performance frame has dimension " + std::to_string(frame.size()) +
                       ", reference has " + std::to_string(ref_->dim()));
  }

  /// True when this frame should be swallowed by the start gate.
  bool gate(std::span<const double> frame) {
    if (!started_ && is_zero(frame)) {
      emit(0);
      return true;
    }
    started_ = true;
    return false;
  }

  std::size_t perf_index() const noexcept { return steps_; }
  void emit(std::size_t u) { path_.push_back({u, steps_}); }
  void emit_revision(std::size_t u) { path_.push_back({u, steps_}); }
  void advance() noexcept { ++steps_; }

  std::shared_ptr<const FeatureMatrix> ref_;
  WarpingPath path_;
  std::size_t steps_ = 0;
  bool started_ = false;
  bool finished_ = false;
};

}  // namespace detail

/// Dixon-style OLTW: a band of accumulated costs grown row by row
/// (performance) and column by column (reference), steered towards the
/// cheapest cell on the band frontier. The reported position never moves
/// backwards.
class OltwDixon : public detail::FollowerCore {
public:
  OltwDixon(std::shared_ptr<const FeatureMatrix> reference, OltwConfig cfg)
      : FollowerCore(std::move(reference)), cfg_(cfg) {
    cfg_.validate();
    rows_.resize(cfg_.window_size);
    perf_.resize(cfg_.window_size * ref_->dim());
  }

  std::size_t step(std::span<const double> frame) {
    check_frame(frame);
    if (gate(frame)) {
      advance();
      return 0;
    }

    if (t_ == npos) {
      t_ = 0;
      j_ = 0;
      store_perf(0, frame);
      eval_row();
    } else {
      const Direction inc = pending_;
      ++t_;
      store_perf(t_, frame);
      eval_row();
      if (inc == Direction::both && j_ + 1 < ref_->size()) {
        ++j_;
        eval_column();
      }
      note_run(inc);
    }

    // Advance the reference for as long as the frontier asks for it; stop
    // when the next move needs a new performance frame.
    for (;;) {
      const Direction inc = decide();
      if (inc != Direction::reference) {
        pending_ = inc;
        break;
      }
      ++j_;
      eval_column();
      note_run(inc);
    }
    finished_ = j_ + 1 == ref_->size();

    estimate_ = std::max(estimate_, row_estimate());
    emit(estimate_);
    advance();
    return estimate_;
  }

  const OltwConfig& config() const noexcept { return cfg_; }
  std::size_t ref_pointer() const noexcept { return j_ == npos ? 0 : j_; }

  /// Heap storage held by the band, in doubles. Bounded by the window, not
  /// by the number of steps taken.
  std::size_t storage() const noexcept {
    std::size_t n = perf_.size();
    for (const auto& r : rows_)
      n += r.cost.capacity();
    return n;
  }

private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  enum class Direction { both, reference, performance };

  struct Row {
    std::size_t t = npos;
    std::size_t lo = 0;  // reference index of cost[0]
    std::vector<double> cost;
  };

  void store_perf(std::size_t t, std::span<const double> frame) {
    std::copy(frame.begin(), frame.end(), perf_.begin() + static_cast<std::ptrdiff_t>((t % cfg_.window_size) * ref_->dim()));
  }
  std::span<const double> perf(std::size_t t) const {
    return {perf_.data() + (t % cfg_.window_size) * ref_->dim(), ref_->dim()};
  }

  double acc(std::size_t x, std::size_t y) const noexcept {
    if (x == npos || y == npos || x > t_ || x + cfg_.window_size <= t_)
      return detail::kInf;
    const Row& r = rows_[x % cfg_.window_size];
    if (r.t != x || y < r.lo || y >= r.lo + r.cost.size())
      return detail::kInf;
    return r.cost[y - r.lo];
  }

  double cell(std::size_t x, std::size_t y) const {
    const double d = detail::cost_unchecked(perf(x), (*ref_)[y], cfg_.metric);
    if (x == 0 && y == 0)
      return 2.0 * d;
    const std::size_t xm = x == 0 ? npos : x - 1;
    const std::size_t ym = y == 0 ? npos : y - 1;
    return std::min({acc(xm, y) + d, acc(x, ym) + d, acc(xm, ym) + 2.0 * d});
  }

  static double normalised(double cost, std::size_t x, std::size_t y) noexcept {
    return cost / static_cast<double>(x + y + 2);
  }

  void eval_row() {
    Row& r = rows_[t_ % cfg_.window_size];
    r.t = t_;
    r.lo = j_ + 1 >= cfg_.window_size ? j_ + 1 - cfg_.window_size : 0;
    r.cost.clear();
    for (std::size_t y = r.lo; y <= j_; ++y)
      r.cost.push_back(cell(t_, y));
  }

  void eval_column() {
    const std::size_t from = t_ + 1 >= cfg_.window_size ? t_ + 1 - cfg_.window_size : 0;
    for (std::size_t x = from; x <= t_; ++x) {
      const double c = cell(x, j_);
      rows_[x % cfg_.window_size].cost.push_back(c);
    }
  }

  // Cheapest frontier cell: the current row (t, *) and current column (*, j).
  // Returns (perf index, ref index); ties favour the corner, then the column.
  std::pair<std::size_t, std::size_t> frontier_argmin() const {
    std::pair<std::size_t, std::size_t> best{t_, j_};
    double best_cost = normalised(acc(t_, j_), t_, j_);
    const Row& r = rows_[t_ % cfg_.window_size];
    for (std::size_t x = t_ + 1 >= cfg_.window_size ? t_ + 1 - cfg_.window_size : 0; x < t_; ++x) {
      const double c = normalised(acc(x, j_), x, j_);
      if (c < best_cost) {
        best_cost = c;
        best = {x, j_};
      }
    }
    for (std::size_t y = r.lo; y < j_; ++y) {
      const double c = normalised(acc(t_, y), t_, y);
      if (c < best_cost) {
        best_cost = c;
        best = {t_, y};
      }
    }
    return best;
  }

  // Estimate for the current performance frame: the earliest cell of the
  // current row whose accumulated cost is within estimate_margin of the
  // row's best normalised cost. Stretches of identical reference frames
  // therefore do not pull the estimate to their far end.
  std::size_t row_estimate() const {
    const Row& r = rows_[t_ % cfg_.window_size];
    double best = detail::kInf;
    for (std::size_t y = r.lo; y <= j_; ++y)
      best = std::min(best, normalised(acc(t_, y), t_, y));
    for (std::size_t y = r.lo; y <= j_; ++y)
      if (acc(t_, y) - best * static_cast<double>(t_ + y + 2) <= cfg_.estimate_margin)
        return y;
    return j_;
  }

  Direction decide() const {
    if (j_ + 1 >= ref_->size())
      return Direction::performance;
    if (previous_ != Direction::both && run_count_ >= cfg_.max_run_count)
      return previous_ == Direction::performance ? Direction::reference : Direction::performance;
    const auto [x, y] = frontier_argmin();
    if (x < t_)
      return Direction::reference;
    if (y < j_)
      return Direction::performance;
    return Direction::both;
  }

  void note_run(Direction inc) noexcept {
    if (inc == previous_)
      ++run_count_;
    else
      run_count_ = 1;
    previous_ = inc;
  }

  OltwConfig cfg_;
  std::vector<Row> rows_;
  std::vector<double> perf_;
  std::size_t t_ = npos;
  std::size_t j_ = npos;
  Direction pending_ = Direction::both;
  Direction previous_ = Direction::both;
  std::size_t run_count_ = 0;
  std::size_t estimate_ = 0;
};

/// Windowed OLTW with backward-forward correction. Each step computes one
/// accumulated-cost column over [pointer - backtrack, pointer + lookahead]
/// using the steps (stay, +1, +2) reference frames per performance frame,
/// each charged the local cost once. Every cell in a column has consumed the
/// same number of performance frames, so raw accumulated costs compare
/// directly. The pointer moves toward the column argmin by at most
/// max_run_count frames; a cheaper cell behind it is emitted as a second
/// pair for the same performance frame.
class OltwArzt : public detail::FollowerCore {
public:
  OltwArzt(std::shared_ptr<const FeatureMatrix> reference, OltwConfig cfg)
      : FollowerCore(std::move(reference)), cfg_(cfg) {
    cfg_.validate();
    prev_.reserve(cfg_.backtrack + cfg_.lookahead + 1);
    cur_.reserve(cfg_.backtrack + cfg_.lookahead + 1);
  }

  std::size_t step(std::span<const double> frame) {
    check_frame(frame);
    if (gate(frame)) {
      advance();
      return 0;
    }

    const std::size_t last = ref_->size() - 1;
    const bool first = !started_column_;
    started_column_ = true;
    const std::size_t lo = pos_ > cfg_.backtrack ? pos_ - cfg_.backtrack : 0;
    const std::size_t hi = std::min(last, pos_ + cfg_.lookahead);

    cur_.assign(hi - lo + 1, detail::kInf);
    for (std::size_t y = lo; y <= hi; ++y) {
      double best;
      if (first) {
        best = y == 0 ? 0.0 : detail::kInf;
      } else {
        best = prev_at(y);
        if (y >= 1)
          best = std::min(best, prev_at(y - 1));
        if (y >= 2)
          best = std::min(best, prev_at(y - 2));
      }
      if (best < detail::kInf)
        best += detail::cost_unchecked(frame, (*ref_)[y], cfg_.metric);
      cur_[y - lo] = best;
    }

    // Forward proposal: argmin over [pos, hi], approached by at most
    // max_run_count frames. Ties keep the smaller position.
    std::size_t target = pos_;
    for (std::size_t y = pos_ + 1; y <= hi; ++y)
      if (at(y, lo) < at(target, lo))
        target = y;
    const std::size_t fwd = std::min(target, pos_ + cfg_.max_run_count);
    emit(fwd);
    pos_ = fwd;

    // Backward re-evaluation: revise only when a cell behind the proposal
    // beats everything at or ahead of it.
    std::size_t back = fwd;
    double back_cost = at(target, lo);
    for (std::size_t y = lo; y < fwd; ++y) {
      if (at(y, lo) < back_cost) {
        back_cost = at(y, lo);
        back = y;
      }
    }
    if (back < fwd) {
      emit_revision(back);
      pos_ = back;
      ++revisions_;
    }

    prev_.swap(cur_);
    prev_lo_ = lo;
    finished_ = pos_ == last;
    advance();
    return pos_;
  }

  const OltwConfig& config() const noexcept { return cfg_; }
  std::size_t revisions() const noexcept { return revisions_; }
  std::size_t storage() const noexcept { return prev_.capacity() + cur_.capacity(); }

private:
  double prev_at(std::size_t y) const noexcept {
    if (y < prev_lo_ || y >= prev_lo_ + prev_.size())
      return detail::kInf;
    return prev_[y - prev_lo_];
  }

  double at(std::size_t y, std::size_t lo) const noexcept { return cur_[y - lo]; }

  OltwConfig cfg_;
  std::vector<double> prev_;
  std::vector<double> cur_;
  std::size_t prev_lo_ = 0;
  bool started_column_ = false;
  std::size_t pos_ = 0;
  std::size_t revisions_ = 0;
};

}  // namespace scorefollow
