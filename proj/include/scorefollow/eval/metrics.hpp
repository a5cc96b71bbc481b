#pragma once

// Evaluation of an emitted warping path against beat annotations: the
// causal mapping function, per-beat errors, the metric suite and
// aggregation across pieces.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "scorefollow/core.hpp"

namespace scorefollow {

/// Reference frame reported for performance frame k: among the pairs with
/// the latest v not exceeding k, the smallest u. Only pairs with v <= k are
/// consulted.
inline std::size_t map_position(const WarpingPath& path, std::size_t k) {
  const auto& p = path.pairs();
  auto it = std::upper_bound(p.begin(), p.end(), k, [](std::size_t kk, const PathPair& q) { return kk < q.v; });
  if (it == p.begin())
    throw InputError("map_position: no path entry at or before performance frame " + std::to_string(k));
  const std::size_t v = std::prev(it)->v;
  std::size_t u = std::numeric_limits<std::size_t>::max();
  for (auto q = it; q != p.begin() && std::prev(q)->v == v; --q)
    u = std::min(u, std::prev(q)->u);
  return u;
}

/// map_position for every k in [0, frames); entries before the first pair
/// are empty.
inline std::vector<std::optional<std::size_t>> map_positions(const WarpingPath& path, std::size_t frames) {
  std::vector<std::optional<std::size_t>> out(frames);
  std::size_t i = 0;
  std::optional<std::size_t> cur;
  const auto& p = path.pairs();
  for (std::size_t k = 0; k < frames; ++k) {
    if (i < p.size() && p[i].v <= k) {
      // Jump to the block of the latest v <= k.
      while (i < p.size() && p[i].v <= k) {
        const std::size_t v = p[i].v;
        std::size_t u = p[i].u;
        while (++i < p.size() && p[i].v == v)
          u = std::min(u, p[i].u);
        cur = u;
      }
    }
    out[k] = cur;
  }
  return out;
}

enum class ErrorMode { detection, transfer };

inline std::string_view to_string(ErrorMode m) { return m == ErrorMode::detection ? "detection" : "transfer"; }

inline std::optional<ErrorMode> error_mode_from_string(std::string_view s) {
  if (s == "detection")
    return ErrorMode::detection;
  if (s == "transfer")
    return ErrorMode::transfer;
  return std::nullopt;
}

/// Ground-truth (beat index, performance seconds) pairs.
class BeatAnnotations {
public:
  BeatAnnotations() = default;
  explicit BeatAnnotations(std::vector<BeatEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 1; i < entries_.size(); ++i)
      if (!(entries_[i].beat > entries_[i - 1].beat) || !(entries_[i].time > entries_[i - 1].time))
        throw InputError("BeatAnnotations: beats and times must be strictly increasing");
    for (const auto& e : entries_)
      if (e.time < 0.0)
        throw InputError("BeatAnnotations: negative time");
  }
  const std::vector<BeatEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

private:
  std::vector<BeatEntry> entries_;
};

inline constexpr double kExcludeMs = 2000.0;
inline constexpr double kExcludeBeats = 2.0;

struct ErrorRecord {
  double beat_index = 0.0;
  double error_ms = 0.0;     // positive: estimate late
  double error_beats = 0.0;  // estimated beat minus true beat
  bool excluded_ms = false;
  bool excluded_beats = false;
};

/// Per-beat errors of a path.
///
/// Beat domain (always transfer): the annotated time t gives frame
/// k = floor(t * fps); error = beat(û_k) - b on the reference grid.
///
/// Millisecond domain, detection mode: the first performance frame whose
/// mapped position reaches the beat's reference frame, minus t. A beat that
/// is never reached gets +inf and is excluded. Transfer mode instead compares
/// reference times: û_k / fps minus the beat's reference time.
inline std::vector<ErrorRecord> compute_errors(const WarpingPath& path, const BeatAnnotations& annotations,
                                               const BeatGrid& ref_grid, const FrameClock& clock,
                                               ErrorMode mode = ErrorMode::detection) {
  if (path.empty())
    throw InputError("compute_errors: empty path");
  if (ref_grid.size() < 2)
    throw InputError("compute_errors: reference grid needs at least two beats");
  const std::size_t frames = path.back().v + 1;
  const auto mapped = map_positions(path, frames);

  // Running maximum of the mapped position; detection searches it.
  std::vector<std::size_t> reach(frames, 0);
  std::optional<std::size_t> run;
  for (std::size_t k = 0; k < frames; ++k) {
    if (mapped[k])
      run = run ? std::max(*run, *mapped[k]) : *mapped[k];
    reach[k] = run ? *run : 0;
  }
  const std::size_t first_defined = static_cast<std::size_t>(
      std::find_if(mapped.begin(), mapped.end(), [](const auto& m) { return m.has_value(); }) - mapped.begin());

  const double inf = std::numeric_limits<double>::infinity();
  const double fps = clock.frame_rate();
  std::vector<ErrorRecord> out;
  out.reserve(annotations.size());
  for (const auto& a : annotations.entries()) {
    ErrorRecord rec;
    rec.beat_index = a.beat;
    const double ref_time = ref_grid.time_of(a.beat);
    const std::size_t k = std::min(time_to_frame(a.time, clock), frames - 1);
    const auto& est = mapped[k];

    rec.error_beats = est ? interp_beat(ref_grid, static_cast<double>(*est) / fps) - a.beat : inf;

    if (mode == ErrorMode::transfer) {
      rec.error_ms = est ? (static_cast<double>(*est) / fps - ref_time) * 1000.0 : inf;
    } else {
      const std::size_t target = time_to_frame(std::max(ref_time, 0.0), clock);
      auto it = std::lower_bound(reach.begin() + static_cast<std::ptrdiff_t>(first_defined), reach.end(), target);
      if (it == reach.end()) {
        rec.error_ms = inf;
      } else {
        const auto d = static_cast<std::size_t>(it - reach.begin());
        rec.error_ms = (frame_to_time(d, clock) - a.time) * 1000.0;
      }
    }
    rec.excluded_ms = !(std::abs(rec.error_ms) <= kExcludeMs);
    rec.excluded_beats = !(std::abs(rec.error_beats) <= kExcludeBeats);
    out.push_back(rec);
  }
  return out;
}

enum class Domain { ms, beats };

/// Summary of one error domain.
struct DomainStats {
  std::size_t count = 0;  // all records, excluded included
  std::size_t excluded = 0;
  std::optional<double> aae, mae, sigma, skew, kurtosis;
  /// (threshold, percent of all records within it); empty when count == 0.
  std::vector<std::pair<double, double>> ar;
  std::vector<std::size_t> hits;  // records within each threshold

  std::optional<double> ar_at(double threshold) const {
    for (const auto& [th, pct] : ar)
      if (th == threshold)
        return pct;
    return std::nullopt;
  }
};

/// |error| statistics and central moments of the signed errors over the
/// non-excluded records; AR over all records.
inline DomainStats domain_stats(std::span<const ErrorRecord> records, Domain domain,
                                std::span<const double> thresholds) {
  DomainStats s;
  s.count = records.size();
  std::vector<double> kept, abs_kept;
  for (const auto& r : records) {
    const bool excluded = domain == Domain::ms ? r.excluded_ms : r.excluded_beats;
    if (excluded) {
      ++s.excluded;
      continue;
    }
    const double e = domain == Domain::ms ? r.error_ms : r.error_beats;
    kept.push_back(e);
    abs_kept.push_back(std::abs(e));
  }
  if (s.count > 0)
    for (double th : thresholds) {
      std::size_t hit = 0;
      for (double a : abs_kept)
        hit += a <= th;
      s.hits.push_back(hit);
      s.ar.emplace_back(th, 100.0 * static_cast<double>(hit) / static_cast<double>(s.count));
    }
  if (kept.empty())
    return s;

  const auto n = static_cast<double>(kept.size());
  double sum = 0.0;
  for (double a : abs_kept)
    sum += a;
  const double aae = sum / n;
  s.aae = aae;
  double var = 0.0;
  for (double a : abs_kept)
    var += (a - aae) * (a - aae);
  s.sigma = std::sqrt(var / n);
  std::sort(abs_kept.begin(), abs_kept.end());
  const std::size_t mid = abs_kept.size() / 2;
  s.mae = abs_kept.size() % 2 ? abs_kept[mid] : 0.5 * (abs_kept[mid - 1] + abs_kept[mid]);

  double mean = 0.0;
  for (double e : kept)
    mean += e;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double e : kept) {
    const double d = e - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 > 0.0) {
    s.skew = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return s;
}

inline const std::vector<double>& default_ms_thresholds() {
  static const std::vector<double> t{50, 100, 300, 500, 1000, 2000};
  return t;
}
inline const std::vector<double>& default_beat_thresholds() {
  static const std::vector<double> t{0.25, 0.5, 1, 2};
  return t;
}

struct FrameTiming {
  double feature_ms = 0.0;
  double align_ms = 0.0;
};

struct LatencyStats {
  double mean_feature_ms = 0.0;
  double mean_align_ms = 0.0;
};

inline LatencyStats latency_stats(std::span<const FrameTiming> timings) {
  if (timings.empty())
    throw InputError("latency_stats: no frames timed");
  LatencyStats s;
  for (const auto& t : timings) {
    s.mean_feature_ms += t.feature_ms;
    s.mean_align_ms += t.align_ms;
  }
  s.mean_feature_ms /= static_cast<double>(timings.size());
  s.mean_align_ms /= static_cast<double>(timings.size());
  return s;
}

/// Aligned-beat count (|error| within 2000 ms) against total beats.
struct PieceCounts {
  std::size_t aligned = 0;
  std::size_t total = 0;
};

struct AggregateAR {
  std::optional<double> piece_wise;  // unweighted mean of per-piece AR@2000
  std::optional<double> total;       // pooled aligned / pooled beats
};

inline AggregateAR aggregate(std::span<const PieceCounts> pieces) {
  if (pieces.empty())
    throw InputError("aggregate: no pieces");
  AggregateAR out;
  double sum = 0.0;
  std::size_t counted = 0, aligned = 0, total = 0;
  for (const auto& p : pieces) {
    aligned += p.aligned;
    total += p.total;
    if (p.total == 0)
      continue;
    sum += 100.0 * static_cast<double>(p.aligned) / static_cast<double>(p.total);
    ++counted;
  }
  if (counted > 0)
    out.piece_wise = sum / static_cast<double>(counted);
  if (total > 0)
    out.total = 100.0 * static_cast<double>(aligned) / static_cast<double>(total);
  return out;
}

struct EvalReport {
  std::size_t beats = 0;
  DomainStats ms;
  DomainStats beat;
  std::optional<double> piece_wise_AR;
  std::optional<double> total_AR;
  std::optional<double> mean_feature_latency_ms;
  std::optional<double> mean_align_latency_ms;

  std::size_t excluded_count() const noexcept { return ms.excluded; }

  PieceCounts counts() const {
    for (std::size_t i = 0; i < ms.ar.size(); ++i)
      if (ms.ar[i].first == kExcludeMs)
        return {ms.hits[i], beats};
    return {0, beats};
  }
};

struct MetricOptions {
  std::vector<double> ms_thresholds = default_ms_thresholds();
  std::vector<double> beat_thresholds = default_beat_thresholds();
};

/// Metric suite for one piece. AR thresholds always include 2000 ms so the
/// piece can be aggregated.
inline EvalReport metrics(std::span<const ErrorRecord> records, const MetricOptions& opts = {}) {
  EvalReport r;
  r.beats = records.size();
  auto ms_th = opts.ms_thresholds;
  if (std::find(ms_th.begin(), ms_th.end(), kExcludeMs) == ms_th.end())
    ms_th.push_back(kExcludeMs);
  r.ms = domain_stats(records, Domain::ms, ms_th);
  r.beat = domain_stats(records, Domain::beats, opts.beat_thresholds);
  if (r.beats > 0) {
    const PieceCounts c = r.counts();
    const AggregateAR agg = aggregate(std::span<const PieceCounts>(&c, 1));
    r.piece_wise_AR = agg.piece_wise;
    r.total_AR = agg.total;
  }
  return r;
}

/// Pooled report across pieces: error statistics over all records, AR split
/// into piece-wise and total, latencies averaged over all timed frames.
inline EvalReport aggregate_report(std::span<const std::vector<ErrorRecord>> per_piece,
                                   std::span<const std::vector<FrameTiming>> timings = {},
                                   const MetricOptions& opts = {}) {
  std::vector<ErrorRecord> pooled;
  std::vector<PieceCounts> counts;
  for (const auto& recs : per_piece) {
    pooled.insert(pooled.end(), recs.begin(), recs.end());
    counts.push_back(metrics(recs, opts).counts());
  }
  EvalReport r = metrics(pooled, opts);
  if (!counts.empty()) {
    const AggregateAR agg = aggregate(counts);
    r.piece_wise_AR = agg.piece_wise;
    r.total_AR = agg.total;
  }
  std::vector<FrameTiming> all;
  for (const auto& t : timings)
    all.insert(all.end(), t.begin(), t.end());
  if (!all.empty()) {
    const auto lat = latency_stats(all);
    r.mean_feature_latency_ms = lat.mean_feature_ms;
    r.mean_align_latency_ms = lat.mean_align_ms;
  }
  return r;
}

}  // namespace scorefollow
