#pragma once

// Latency table over feature kinds x followers on one synthetic piece.

#include <ostream>
#include <string>
#include <vector>

#include "scorefollow/runtime/simulation.hpp"
#include "scorefollow/score/synthetic.hpp"

namespace scorefollow {

struct BenchRow {
  FeatureKind feature;
  FollowerKind follower;
  double feature_ms = 0.0;
  double align_ms = 0.0;
  double total_ms() const noexcept { return feature_ms + align_ms; }
};

struct BenchOptions {
  std::vector<FeatureKind> features{FeatureKind::chroma, FeatureKind::mel, FeatureKind::mfcc, FeatureKind::lse};
  std::vector<FollowerKind> followers{FollowerKind::dixon, FollowerKind::arzt, FollowerKind::hmm};
  int measures = 16;
  std::uint32_t piece = 1;
};

inline std::vector<BenchRow> bench(const BenchOptions& opts = {}) {
  synthetic::SuiteConfig suite;
  suite.measures = opts.measures;
  const auto piece = synthetic::suite_piece(opts.piece, suite);
  const BeatAnnotations ann(piece.performance.annotations);

  std::vector<BenchRow> rows;
  for (FeatureKind fk : opts.features) {
    SimulationOptions sim;
    sim.features.kind = fk;
    std::vector<std::string> warnings;
    const Reference ref =
        prepare_reference(piece.score, synthesis_bpm(piece.score, ann, std::nullopt, warnings), sim.features);
    for (FollowerKind fo : opts.followers) {
      sim.align.kind = fo;
      const auto res = run_simulation(ref, piece.performance.audio, ann, sim);
      rows.push_back({fk, fo, res.report.mean_feature_latency_ms.value_or(0.0),
                      res.report.mean_align_latency_ms.value_or(0.0)});
    }
  }
  return rows;
}

/// Mean of a column over the rows whose key matches.
template <class Key, class Proj, class Val>
double bench_mean(const std::vector<BenchRow>& rows, Key key, Proj proj, Val val) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (proj(r) == key) {
      sum += val(r);
      ++n;
    }
  return n ? sum / n : 0.0;
}

inline void print_bench(std::ostream& os, const std::vector<BenchRow>& rows, double frame_ms) {
  os << "feature\tfollower\tfeature_ms\talign_ms\ttotal_ms\tbudget_ms\n";
  for (const auto& r : rows)
    os << to_string(r.feature) << '\t' << to_string(r.follower) << '\t' << r.feature_ms << '\t' << r.align_ms << '\t'
       << r.total_ms() << '\t' << frame_ms << '\n';
}

}  // namespace scorefollow
