// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "scorefollow/eval/metrics.hpp"
#include "scorefollow/eval/report_io.hpp"
#include "scorefollow/runtime/bench.hpp"
#include "scorefollow/runtime/simulation.hpp"
#include "scorefollow/score/synthetic.hpp"

using namespace scorefollow;

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kInfinity = std::numeric_limits<double>::infinity();

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::string detail;
  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

constexpr std::array<FollowerKind, 3> kFollowers{FollowerKind::dixon, FollowerKind::arzt, FollowerKind::hmm};

std::string name(FollowerKind f) { return std::string(to_string(f)); }
std::string name(FeatureKind f) { return std::string(to_string(f)); }

// 1 ---------------------------------------------------------------------------

std::optional<std::size_t> brute_map(const std::vector<PathPair>& pairs, std::size_t k) {
  std::optional<std::size_t> vmax;
  for (const auto& p : pairs)
    if (p.v <= k && (!vmax || p.v > *vmax))
      vmax = p.v;
  if (!vmax)
    return std::nullopt;
  std::size_t u = std::numeric_limits<std::size_t>::max();
  for (const auto& p : pairs)
    if (p.v == *vmax)
      u = std::min(u, p.u);
  return u;
}

Verdict mapping_oracle() {
  Verdict v;
  std::mt19937 rng(1);
  std::uniform_int_distribution<int> len(1, 200), step(0, 2), start(0, 5);
  std::vector<std::vector<PathPair>> paths;
  for (int t = 0; t < 1000; ++t) {
    // Admissible: both coordinates non-decreasing with unit-bounded steps.
    std::vector<PathPair> p;
    std::size_t u = static_cast<std::size_t>(start(rng)), w = static_cast<std::size_t>(start(rng));
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      p.push_back({u, w});
      switch (step(rng)) {
        case 0: ++u; break;
        case 1: ++w; break;
        default: ++u, ++w;
      }
    }
    paths.push_back(std::move(p));
  }
  const auto t0 = Clock::now();
  std::size_t checked = 0;
  for (const auto& pairs : paths) {
    const WarpingPath path(pairs);
    const std::size_t frames = pairs.back().v + 3;
    const auto all = map_positions(path, frames);
    for (std::size_t k = 0; k < frames; ++k, ++checked) {
      const auto expect = brute_map(pairs, k);
      if (all[k] != expect || (expect && map_position(path, k) != *expect)) {
        v.check(false, "mismatch at frame " + std::to_string(k));
        return v;
      }
    }
  }
  const double dt = seconds_since(t0);
  v.check(dt < 1.0, fmt("runtime %.3f s", dt));
  v.note(std::to_string(checked) + " frames over 1000 paths" + fmt(", %.3f s", dt));
  return v;
}

// 2 ---------------------------------------------------------------------------

ErrorRecord ms_record(double e) { return {0.0, e, 0.0, std::abs(e) > kExcludeMs, false}; }

Verdict metric_oracle() {
  Verdict v;
  std::mt19937 rng(2);
  std::student_t_distribution<double> heavy(3.0);
  std::uniform_int_distribution<int> size(3, 300);
  const double tol = 1e-9;
  double worst = 0.0;
  auto near = [&](std::optional<double> got, long double want, double scale, const char* what) {
    const double d = got ? std::abs(*got - static_cast<double>(want)) / scale : kInfinity;
    worst = std::max(worst, d);
    if (!(d <= tol))
      v.check(false, what);
  };
  for (int t = 0; t < 100; ++t) {
    std::vector<double> e(static_cast<std::size_t>(size(rng)));
    for (double& x : e)
      x = 50.0 + 500.0 * heavy(rng);
    std::vector<ErrorRecord> recs;
    for (double x : e)
      recs.push_back(ms_record(x));
    const auto r = metrics(recs);

    std::vector<long double> kept;
    for (double x : e)
      if (std::abs(x) <= 2000.0)
        kept.push_back(x);
    if (kept.size() < 2)
      continue;
    const auto n = static_cast<long double>(kept.size());
    long double mean = 0, aae = 0;
    for (auto x : kept) {
      mean += x;
      aae += std::fabs(x);
    }
    mean /= n;
    aae /= n;
    long double var_abs = 0, m2 = 0, m3 = 0, m4 = 0;
    for (auto x : kept) {
      var_abs += (std::fabs(x) - aae) * (std::fabs(x) - aae);
      m2 += (x - mean) * (x - mean);
      m3 += std::pow(x - mean, 3);
      m4 += std::pow(x - mean, 4);
    }
    m2 /= n, m3 /= n, m4 /= n;
    std::vector<long double> abs_sorted;
    for (auto x : kept)
      abs_sorted.push_back(std::fabs(x));
    std::sort(abs_sorted.begin(), abs_sorted.end());
    const std::size_t h = abs_sorted.size() / 2;
    const long double mae = abs_sorted.size() % 2 ? abs_sorted[h] : (abs_sorted[h - 1] + abs_sorted[h]) / 2;

    near(r.ms.aae, aae, std::max(1.0, static_cast<double>(aae)), "AAE");
    near(r.ms.mae, mae, std::max(1.0, static_cast<double>(mae)), "MAE");
    near(r.ms.sigma, std::sqrt(var_abs / n), 1e3, "sigma");
    near(r.ms.skew, m3 / std::pow(m2, 1.5L), 1.0, "skew");
    near(r.ms.kurtosis, m4 / (m2 * m2) - 3, 1.0, "kurtosis");
    for (double th : default_ms_thresholds()) {
      std::size_t hit = 0;
      for (double x : e)
        hit += std::abs(x) <= th;
      near(r.ms.ar_at(th), 100.0L * hit / e.size(), 1.0, "AR");
    }
  }

  std::vector<ErrorRecord> fixture{ms_record(100), ms_record(2500), ms_record(300)};
  const auto r = metrics(fixture);
  v.check(r.ms.aae && *r.ms.aae == 200.0, "{100,2500,300} AAE != 200");
  v.check(r.excluded_count() == 1, "{100,2500,300} excluded != 1");
  v.check(r.ms.ar_at(2000) && std::abs(*r.ms.ar_at(2000) - 200.0 / 3.0) < 1e-12, "{100,2500,300} AR@2000");
  const auto edge = metrics(std::vector<ErrorRecord>{ms_record(2000), ms_record(-2000.001)});
  v.check(edge.excluded_count() == 1, "2000 ms boundary");
  const auto beats = metrics(std::vector<ErrorRecord>{{0, 0, 2.0, false, false}, {1, 0, -2.01, false, true}});
  v.check(beats.beat.aae && *beats.beat.aae == 2.0, "2 beat boundary");
  v.note(fmt("worst relative deviation %.2e", worst));
  return v;
}

// 3 ---------------------------------------------------------------------------

Verdict self_alignment() {
  Verdict v;
  const auto doc = synthetic::score(3, 30);  // 120 beats at 120 BPM = 60 s
  for (FeatureKind fk : {FeatureKind::chroma, FeatureKind::lse}) {
    SimulationOptions o;
    o.features.kind = fk;
    const Reference ref = prepare_reference(doc, 120.0, o.features);
    const BeatAnnotations ann(ref.grid.entries());
    for (FollowerKind fo : kFollowers) {
      o.align.kind = fo;
      const auto t0 = Clock::now();
      const auto r = run_simulation(ref, ref.audio, ann, o);
      const double dt = seconds_since(t0);
      const double ar = r.report.ms.ar_at(100).value_or(0.0), aae = r.report.ms.aae.value_or(kInfinity);
      const std::string tag = name(fk) + "/" + name(fo);
      v.check(ar >= 95.0, tag + fmt(" AR@100 %.1f", ar));
      v.check(aae <= 67.0, tag + fmt(" AAE %.1f", aae));
      v.check(dt < 10.0, tag + fmt(" runtime %.2f s", dt));
      v.note(tag + fmt(" AR@100 %.1f", ar) + fmt(" AAE %.1f", aae));
    }
  }
  return v;
}

// 4 ---------------------------------------------------------------------------

Verdict tempo_warp() {
  Verdict v;
  const auto doc = synthetic::score(7, 30);
  for (FeatureKind fk : {FeatureKind::chroma, FeatureKind::lse})
    for (double speed : {0.8, 1.25}) {
      const auto perf = synthetic::perform(doc, synthetic::scaled(120.0, speed), RenderConfig{});
      const BeatAnnotations ann(perf.annotations);
      for (FollowerKind fo : kFollowers) {
        SimulationOptions o;
        o.features.kind = fk;
        o.align.kind = fo;
        o.bpm = 120.0;
        const auto r = run_simulation(doc, perf.audio, ann, o);
        const std::string tag = name(fk) + fmt("@%.2f/", speed) + name(fo);
        if (fo == FollowerKind::hmm) {
          const double ar = r.report.ms.ar_at(2000).value_or(0.0);
          v.check(ar >= 50.0, tag + fmt(" AR@2000 %.1f", ar));
          v.note(tag + fmt(" AR@2000 %.1f", ar));
        } else {
          const double mae = r.report.ms.mae.value_or(kInfinity);
          v.check(mae <= 100.0, tag + fmt(" MAE %.1f", mae));
          v.note(tag + fmt(" MAE %.1f", mae));
        }
      }
    }
  return v;
}

// 5 ---------------------------------------------------------------------------

Verdict suite_ordering() {
  Verdict v;
  std::array<std::vector<std::vector<ErrorRecord>>, 3> recs;
  for (std::uint32_t i = 1; i <= 10; ++i) {
    const auto piece = synthetic::suite_piece(i);
    const BeatAnnotations ann(piece.performance.annotations);
    SimulationOptions o;
    o.features.kind = FeatureKind::chroma;
    std::vector<std::string> warnings;
    const Reference ref =
        prepare_reference(piece.score, synthesis_bpm(piece.score, ann, std::nullopt, warnings), o.features);
    for (std::size_t f = 0; f < 3; ++f) {
      o.align.kind = kFollowers[f];
      recs[f].push_back(run_simulation(ref, piece.performance.audio, ann, o).errors);
    }
  }
  std::array<EvalReport, 3> rep;
  for (std::size_t f = 0; f < 3; ++f)
    rep[f] = aggregate_report(recs[f]);
  const double dixon = rep[0].total_AR.value_or(0), arzt = rep[1].total_AR.value_or(0),
               hmm = rep[2].total_AR.value_or(0);
  v.check(arzt >= dixon, "arzt < dixon");
  v.check(dixon > hmm, "dixon not above hmm");
  for (std::size_t f = 0; f < 2; ++f) {
    const double skew = rep[f].ms.skew.value_or(-kInfinity);
    v.check(skew >= 0.0, name(kFollowers[f]) + fmt(" skew %.2f", skew));
  }
  v.note(fmt("total AR arzt %.2f", arzt) + fmt(" dixon %.2f", dixon) + fmt(" hmm %.2f", hmm));
  v.note(fmt("skew dixon %.2f", rep[0].ms.skew.value_or(NAN)) + fmt(" arzt %.2f", rep[1].ms.skew.value_or(NAN)));
  v.note(fmt("AR@100 dixon %.1f", rep[0].ms.ar_at(100).value_or(NAN)) +
         fmt(" arzt %.1f", rep[1].ms.ar_at(100).value_or(NAN)) + fmt(" hmm %.1f", rep[2].ms.ar_at(100).value_or(NAN)));
  return v;
}

// 6 ---------------------------------------------------------------------------

Verdict latency() {
  Verdict v;
  const auto rows = bench();
  const double budget = 1000.0 / FrameClock{}.frame_rate();
  auto feat = [&](FeatureKind k) {
    return bench_mean(rows, k, [](const BenchRow& r) { return r.feature; }, [](const BenchRow& r) { return r.feature_ms; });
  };
  auto align = [&](FollowerKind k) {
    return bench_mean(rows, k, [](const BenchRow& r) { return r.follower; }, [](const BenchRow& r) { return r.align_ms; });
  };
  const double lse = feat(FeatureKind::lse), chroma = feat(FeatureKind::chroma);
  const double dixon = align(FollowerKind::dixon), arzt = align(FollowerKind::arzt), hmm = align(FollowerKind::hmm);
  v.check(lse < chroma, "lse not cheaper than chroma");
  v.check(arzt < dixon, "arzt not cheaper than dixon");
  v.check(dixon < hmm, "dixon not cheaper than hmm");
  double worst = 0.0;
  for (const auto& r : rows) {
    worst = std::max(worst, r.total_ms());
    v.check(r.total_ms() < budget, name(r.feature) + "/" + name(r.follower) + fmt(" %.3f ms", r.total_ms()));
  }
  v.note(fmt("feature ms lse %.4f", lse) + fmt(" chroma %.4f", chroma));
  v.note(fmt("align ms arzt %.4f", arzt) + fmt(" dixon %.4f", dixon) + fmt(" hmm %.4f", hmm));
  v.note(fmt("worst total %.3f ms", worst));
  return v;
}

// 7 ---------------------------------------------------------------------------

ScoreDocument measures_of(int num, int den, int count) {
  ScoreDocument d;
  d.time_signatures.push_back({0.0, num, den});
  d.notes.push_back({0.0, num * 4.0 / den * count, 60, 80});
  d.normalise();
  return d;
}

Verdict compound_meter() {
  Verdict v;
  for (auto [num, expect] : {std::pair{6, 2}, {9, 3}, {12, 4}}) {
    std::vector<std::string> warnings;
    const auto g = beat_grid(measures_of(num, 8, 3), 120.0, &warnings);
    v.check(g.size() == static_cast<std::size_t>(3 * expect),
            std::to_string(num) + "/8 gives " + std::to_string(g.size()) + " beats over 3 measures");
    v.check(warnings.empty(), std::to_string(num) + "/8 warned");
  }
  const auto g = beat_grid(measures_of(4, 4, 4), 120.0);
  v.check(g.size() == 16, "4/4 beat count");
  for (std::size_t i = 0; i < g.size(); ++i)
    v.check(g[i].time == 0.5 * static_cast<double>(i), "4/4 spacing at beat " + std::to_string(i));
  return v;
}

// 8 ---------------------------------------------------------------------------

std::string serialise(const SimulationResult& r) {
  std::ostringstream os;
  write_events(os, r.events, false);
  write_path(os, r.path);
  write_errors(os, r.errors);
  auto j = to_json(r.report);
  j.erase("mean_feature_latency_ms");
  j.erase("mean_align_latency_ms");
  os << j.dump();
  return os.str();
}

Verdict determinism() {
  Verdict v;
  const auto piece = synthetic::suite_piece(4, {.measures = 12});
  const BeatAnnotations ann(piece.performance.annotations);
  std::size_t prefixes = 0;
  for (FeatureKind fk : {FeatureKind::chroma, FeatureKind::lse})
    for (FollowerKind fo : kFollowers) {
      SimulationOptions o;
      o.features.kind = fk;
      o.align.kind = fo;
      const auto a = run_simulation(piece.score, piece.performance.audio, ann, o);
      const auto b = run_simulation(piece.score, piece.performance.audio, ann, o);
      const std::string tag = name(fk) + "/" + name(fo);
      v.check(serialise(a) == serialise(b), tag + " outputs differ between runs");
      for (double frac : {0.1, 0.37, 0.5, 0.81}) {
        AudioBuffer cut = piece.performance.audio;
        cut.samples.resize(static_cast<std::size_t>(frac * static_cast<double>(cut.samples.size())));
        const auto p = run_simulation(piece.score, cut, ann, o);
        ++prefixes;
        bool same = p.events.size() <= a.events.size();
        for (std::size_t k = 0; same && k < p.events.size(); ++k)
          same = p.events[k].perf_time == a.events[k].perf_time &&
                 p.events[k].est_ref_frame == a.events[k].est_ref_frame && p.events[k].est_beat == a.events[k].est_beat;
        v.check(same, tag + fmt(" prefix %.2f changed earlier events", frac));
      }
    }
  v.note("6 configurations, " + std::to_string(prefixes) + " prefixes");
  return v;
}

// 9 ---------------------------------------------------------------------------

Verdict piece_vs_total() {
  Verdict v;
  const auto a = aggregate(std::vector<PieceCounts>{{1, 1}, {1, 3}});
  const double pw = a.piece_wise.value_or(NAN), tot = a.total.value_or(NAN);
  v.check(std::abs(pw - 200.0 / 3.0) < 1e-12, fmt("piece-wise %.4f", pw));
  v.check(tot == 50.0, fmt("total %.4f", tot));
  v.note(fmt("piece-wise %.1f", pw) + fmt(" total %.1f", tot));
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"mapping function matches brute force", mapping_oracle},
      {"metrics match moment and counting oracles", metric_oracle},
      {"self-alignment", self_alignment},
      {"tempo-warp tracking", tempo_warp},
      {"synthetic suite ordering and skew", suite_ordering},
      {"per-frame latency ordering and budget", latency},
      {"compound-meter beat grid", compound_meter},
      {"determinism and causality", determinism},
      {"piece-wise vs total AR", piece_vs_total},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    const auto t0 = Clock::now();
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    failed += !v.pass;
    std::printf("%s %zu %s (%.1f s): %s\n", v.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, seconds_since(t0),
                v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
