#pragma once

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "scorefollow/core.hpp"
#include "scorefollow/eval/metrics.hpp"

namespace scorefollow {

namespace detail {

inline nlohmann::json opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline std::string threshold_key(double th) {
  std::ostringstream os;
  os << th;
  return os.str();
}

}  // namespace detail

/// JSON document with one key per report field. AR entries are flattened
/// to "AR@<ms>" and "AR_beats@<beats>"; undefined values are null.
inline nlohmann::json to_json(const EvalReport& r) {
  using detail::opt;
  nlohmann::json j;
  j["beats"] = r.beats;
  j["AAE_ms"] = opt(r.ms.aae);
  j["MAE_ms"] = opt(r.ms.mae);
  j["sigma_ms"] = opt(r.ms.sigma);
  j["skew"] = opt(r.ms.skew);
  j["kurtosis"] = opt(r.ms.kurtosis);
  for (double th : default_ms_thresholds())
    j["AR@" + detail::threshold_key(th)] = opt(r.ms.ar_at(th));
  for (const auto& [th, pct] : r.ms.ar)
    j["AR@" + detail::threshold_key(th)] = pct;
  j["AAE_beats"] = opt(r.beat.aae);
  j["MAE_beats"] = opt(r.beat.mae);
  for (double th : default_beat_thresholds())
    j["AR_beats@" + detail::threshold_key(th)] = opt(r.beat.ar_at(th));
  for (const auto& [th, pct] : r.beat.ar)
    j["AR_beats@" + detail::threshold_key(th)] = pct;
  j["piece_wise_AR"] = opt(r.piece_wise_AR);
  j["total_AR"] = opt(r.total_AR);
  j["mean_feature_latency_ms"] = opt(r.mean_feature_latency_ms);
  j["mean_align_latency_ms"] = opt(r.mean_align_latency_ms);
  j["excluded_count"] = r.excluded_count();
  return j;
}

/// Flat TSV of error records for plotting. Infinite errors print as "inf".
inline void write_errors(std::ostream& os, const std::vector<ErrorRecord>& records) {
  os << "beat_index\terror_ms\terror_beats\texcluded_ms\texcluded_beats\n";
  os << std::setprecision(10);
  for (const auto& r : records)
    os << r.beat_index << '\t' << r.error_ms << '\t' << r.error_beats << '\t' << int(r.excluded_ms) << '\t'
       << int(r.excluded_beats) << '\n';
}

/// `beat_index<TAB>time_sec` lines; blank lines and '#' comments skipped,
/// as is a first line that does not start with a number (header).
inline std::vector<BeatEntry> read_beat_tsv(std::istream& is, const std::string& what = "beat table") {
  std::vector<BeatEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line[0] == '#')
      continue;
    std::istringstream ls(line);
    BeatEntry e;
    if (!(ls >> e.beat >> e.time)) {
      if (out.empty() && lineno == 1)
        continue;
      throw ParseError(what + ": malformed line " + std::to_string(lineno));
    }
    out.push_back(e);
  }
  return out;
}

inline void write_beat_tsv(std::ostream& os, const std::vector<BeatEntry>& entries) {
  os << std::setprecision(12);
  for (const auto& e : entries)
    os << e.beat << '\t' << e.time << '\n';
}

}  // namespace scorefollow
