#pragma once

// Single-threaded simulation driver: score -> reference rendering ->
// reference features, then the performance is streamed frame by frame
// through the processor and the follower, and the emitted path is scored.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "scorefollow/align/follower.hpp"
#include "scorefollow/core.hpp"
#include "scorefollow/eval/metrics.hpp"
#include "scorefollow/eval/report_io.hpp"
#include "scorefollow/features.hpp"
#include "scorefollow/runtime/stream.hpp"
#include "scorefollow/score/beat_grid.hpp"
#include "scorefollow/score/midi.hpp"
#include "scorefollow/score/render.hpp"
#include "scorefollow/wav.hpp"

namespace scorefollow {

struct SimulationOptions {
  FeatureConfig features{};
  AlignConfig align{};
  /// Average performance tempo in annotated beats per minute. Unset: derived
  /// from the annotations. Either way it is rounded to 20 BPM.
  std::optional<double> bpm;
  ErrorMode error_mode = ErrorMode::detection;
  /// Samples per simulated audio callback.
  std::size_t chunk = 1024;
  MetricOptions metric_options{};
  /// Reference rendering parameters; bpm and clock are filled in.
  RenderConfig render{};
};

struct PositionEvent {
  double perf_time = 0.0;
  std::size_t est_ref_frame = 0;
  double est_beat = 0.0;
  double feature_ms = 0.0;
  double align_ms = 0.0;
};

struct SimulationResult {
  double bpm = 0.0;
  BeatGrid ref_grid;
  std::vector<PositionEvent> events;
  WarpingPath path;
  std::vector<ErrorRecord> errors;
  EvalReport report;
  std::vector<FrameTiming> timings;
  std::vector<std::string> warnings;
};

/// Average tempo of annotated beats: (beats - 1) / duration * 60.
inline std::optional<double> annotated_tempo(const BeatAnnotations& ann) {
  if (ann.size() < 2)
    return std::nullopt;
  const auto& e = ann.entries();
  return (static_cast<double>(e.size()) - 1.0) / (e.back().time - e.front().time) * 60.0;
}

/// Rendering tempo (quarter notes per minute, multiple of 20).
inline double synthesis_bpm(const ScoreDocument& score, const BeatAnnotations& ann, std::optional<double> bpm,
                            std::vector<std::string>& warnings) {
  std::optional<double> beat_bpm = bpm ? bpm : annotated_tempo(ann);
  if (!beat_bpm) {
    warnings.push_back("fewer than two annotations; rendering at 120 BPM");
    beat_bpm = 120.0 / quarters_per_beat(score);
  }
  return round_tempo(*beat_bpm * quarters_per_beat(score));
}

/// Offline preprocessing shared by every run on the same score.
struct Reference {
  double bpm = 0.0;
  AudioBuffer audio;
  std::shared_ptr<const FeatureMatrix> features;
  BeatGrid grid;
  std::vector<std::string> warnings;
};

inline Reference prepare_reference(const ScoreDocument& score, double bpm, const FeatureConfig& fcfg,
                                   RenderConfig rcfg = {}) {
  Reference ref;
  ref.bpm = bpm;
  rcfg.bpm = bpm;
  rcfg.clock = fcfg.clock;
  auto rendering = render_reference(score, rcfg);
  ref.audio = std::move(rendering.audio);
  ref.warnings = std::move(rendering.warnings);
  if (ref.audio.samples.empty())
    throw InputError("score renders to silence (no playable notes)");
  ref.features = std::make_shared<const FeatureMatrix>(extract_features(ref.audio, fcfg));
  ref.grid = beat_grid(score, bpm, &ref.warnings);
  return ref;
}

/// Streams `perf` through a fresh processor and follower. Timings are wall
/// clock from window receipt to emitted estimate; everything else is a pure
/// function of the inputs.
inline SimulationResult run_simulation(const Reference& ref, const AudioBuffer& perf, const BeatAnnotations& ann,
                                       const SimulationOptions& opts) {
  using clock = std::chrono::steady_clock;
  const FeatureConfig& fcfg = opts.features;
  if (perf.sample_rate != fcfg.clock.sample_rate())
    throw ConfigError("performance sample rate differs from the feature clock");

  SimulationResult res;
  res.bpm = ref.bpm;
  res.ref_grid = ref.grid;
  res.warnings = ref.warnings;

  Processor proc(fcfg);
  Follower follower(ref.features, fcfg.kind, opts.align);
  FrameBlocker blocker(fcfg.window_size(), fcfg.clock.hop());
  BufferSource source(perf.samples, opts.chunk);
  const double fps = fcfg.clock.frame_rate();
  const bool have_grid = ref.grid.size() >= 2;

  for (auto chunk = source.next(); !chunk.empty(); chunk = source.next()) {
    blocker.push(chunk, [&](std::span<const double> window) {
      const auto t0 = clock::now();
      const auto features = proc.process_window(window);
      const auto t1 = clock::now();
      const std::size_t before = follower.path().size();
      follower.step(features);
      const auto t2 = clock::now();

      const auto& pairs = follower.path().pairs();
      std::size_t est = pairs[before].u;
      for (std::size_t i = before + 1; i < pairs.size(); ++i)
        est = std::min(est, pairs[i].u);

      PositionEvent ev;
      ev.perf_time = frame_to_time(res.events.size(), fcfg.clock);
      ev.est_ref_frame = est;
      ev.est_beat = have_grid ? interp_beat(ref.grid, static_cast<double>(est) / fps) : 0.0;
      ev.feature_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
      ev.align_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
      res.timings.push_back({ev.feature_ms, ev.align_ms});
      res.events.push_back(ev);
    });
  }

  if (follower.steps() > 0)
    res.path = follower.finalize();
  if (follower.finished() && !res.path.empty() && res.path.back().v + 1 < res.events.size())
    res.warnings.push_back("follower reached the end of the reference before the performance ended");

  if (ann.empty()) {
    res.warnings.push_back("no annotations; metrics are empty");
  } else if (!have_grid) {
    res.warnings.push_back("reference grid has fewer than two beats; metrics are empty");
  } else if (res.path.empty()) {
    res.warnings.push_back("performance shorter than one frame; every beat unaligned");
    const double inf = std::numeric_limits<double>::infinity();
    for (const auto& a : ann.entries())
      res.errors.push_back({a.beat, inf, inf, true, true});
  } else {
    res.errors = compute_errors(res.path, ann, ref.grid, fcfg.clock, opts.error_mode);
  }
  res.report = metrics(res.errors, opts.metric_options);
  if (!res.timings.empty()) {
    const auto lat = latency_stats(res.timings);
    res.report.mean_feature_latency_ms = lat.mean_feature_ms;
    res.report.mean_align_latency_ms = lat.mean_align_ms;
  }
  return res;
}

inline SimulationResult run_simulation(const ScoreDocument& score, const AudioBuffer& perf, const BeatAnnotations& ann,
                                       const SimulationOptions& opts) {
  std::vector<std::string> warnings;
  const double bpm = synthesis_bpm(score, ann, opts.bpm, warnings);
  Reference ref = prepare_reference(score, bpm, opts.features, opts.render);
  ref.warnings.insert(ref.warnings.begin(), warnings.begin(), warnings.end());
  return run_simulation(ref, perf, ann, opts);
}

/// File-backed run description, as assembled by the CLI.
struct RunConfig {
  std::filesystem::path score;
  std::filesystem::path performance;
  std::filesystem::path annotations;
  SimulationOptions options{};

  void validate() const {
    for (const auto& p : {score, performance, annotations})
      if (!std::filesystem::exists(p))
        throw std::runtime_error("file not found: " + p.string());
  }
};

inline BeatAnnotations read_annotations(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f)
    throw std::runtime_error("cannot open " + path.string());
  try {
    return BeatAnnotations(read_beat_tsv(f, path.string()));
  } catch (const InputError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline SimulationResult run_simulation(const RunConfig& cfg) {
  cfg.validate();
  const ScoreDocument score = read_midi(cfg.score);
  const AudioBuffer perf = wav::read(cfg.performance, cfg.options.features.clock.sample_rate());
  const BeatAnnotations ann = read_annotations(cfg.annotations);
  SimulationResult res = run_simulation(score, perf, ann, cfg.options);
  res.warnings.insert(res.warnings.begin(), score.warnings.begin(), score.warnings.end());
  return res;
}

/// Events TSV. With `timings` false the latency columns are left out, which
/// makes the output a pure function of the inputs.
inline void write_events(std::ostream& os, const std::vector<PositionEvent>& events, bool timings = true) {
  os << "perf_time\test_ref_frame\test_beat";
  if (timings)
    os << "\tfeature_ms\talign_ms";
  os << '\n' << std::setprecision(10);
  for (const auto& e : events) {
    os << e.perf_time << '\t' << e.est_ref_frame << '\t' << e.est_beat;
    if (timings)
      os << '\t' << e.feature_ms << '\t' << e.align_ms;
    os << '\n';
  }
}

}  // namespace scorefollow
