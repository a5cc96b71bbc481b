#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage or configuration
// error, 2 data error (unreadable or malformed input, unusable content).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scorefollow/runtime/bench.hpp"
#include "scorefollow/runtime/simulation.hpp"
#include "scorefollow/score/synthetic.hpp"

namespace scorefollow {

namespace cli_detail {

namespace fs = std::filesystem;

struct ClockArgs {
  double sample_rate = 44100.0;
  double fps = 30.0;
  FrameClock clock() const {
    try {
      return FrameClock(sample_rate, fps);
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
  }
};

inline void add_clock(CLI::App& cmd, ClockArgs& c) {
  cmd.add_option("--sample-rate", c.sample_rate, "Analysis sample rate in Hz")->capture_default_str();
  cmd.add_option("--fps", c.fps, "Frame rate in frames per second")->capture_default_str();
}

template <class Enum>
Enum parse_enum(const std::string& s, std::optional<Enum> (*from)(std::string_view), const char* what) {
  if (auto v = from(s))
    return *v;
  throw ConfigError(std::string("unknown ") + what + ": " + s);
}

inline std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f)
    throw std::runtime_error("cannot write " + p.string());
  return f;
}

inline void write_grid(const fs::path& p, const BeatGrid& grid) {
  auto f = open_out(p);
  f << "beat\ttime\n";
  write_beat_tsv(f, grid.entries());
}

inline BeatGrid read_grid(const fs::path& p) {
  std::ifstream f(p);
  if (!f)
    throw std::runtime_error("cannot open " + p.string());
  return BeatGrid(read_beat_tsv(f, p.string()));
}

struct RunArgs {
  std::string score, perf, ann, out = "out";
  std::string feature = "chroma", follower = "arzt", bpm = "auto", error_mode = "detection";
  std::optional<std::string> metric;
  ClockArgs clock;
  std::size_t chunk = 1024;
  bool no_timings = false;
  std::optional<std::size_t> fft_size, window_size, max_run_count, backtrack, lookahead, max_jump;
  std::optional<double> estimate_margin, p_stay, lambda, tau;
};

inline SimulationOptions simulation_options(const RunArgs& a) {
  SimulationOptions o;
  o.features.kind = parse_enum(a.feature, feature_kind_from_string, "feature");
  o.features.clock = a.clock.clock();
  if (a.fft_size)
    o.features.fft_size = *a.fft_size;
  o.features.validate();
  o.align.kind = parse_enum(a.follower, follower_kind_from_string, "follower");
  if (a.metric)
    o.align.metric = parse_enum(*a.metric, cost_metric_from_string, "metric");
  if (a.window_size) o.align.oltw.window_size = *a.window_size;
  if (a.max_run_count) o.align.oltw.max_run_count = *a.max_run_count;
  if (a.backtrack) o.align.oltw.backtrack = *a.backtrack;
  if (a.lookahead) o.align.oltw.lookahead = *a.lookahead;
  if (a.estimate_margin) o.align.oltw.estimate_margin = *a.estimate_margin;
  if (a.p_stay) o.align.hmm.p_stay = *a.p_stay;
  if (a.lambda) o.align.hmm.lambda = *a.lambda;
  if (a.max_jump) o.align.hmm.max_jump = *a.max_jump;
  if (a.tau) o.align.hmm.tau = *a.tau;
  o.align.oltw.validate();
  o.align.hmm.validate();
  o.error_mode = parse_enum(a.error_mode, error_mode_from_string, "error mode");
  if (a.bpm != "auto") {
    try {
      o.bpm = std::stod(a.bpm);
    } catch (const std::exception&) {
      throw ConfigError("--bpm must be a number or 'auto'");
    }
    if (!(*o.bpm > 0.0))
      throw ConfigError("--bpm must be positive");
  }
  if (a.chunk == 0)
    throw ConfigError("--chunk must be positive");
  o.chunk = a.chunk;
  return o;
}

inline int do_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg{a.score, a.perf, a.ann, simulation_options(a)};
  const SimulationResult res = run_simulation(cfg);
  for (const auto& w : res.warnings)
    err << "warning: " << w << '\n';

  const fs::path dir(a.out);
  fs::create_directories(dir);
  {
    auto f = open_out(dir / "events.tsv");
    write_events(f, res.events, !a.no_timings);
  }
  {
    auto f = open_out(dir / "path.tsv");
    write_path(f, res.path);
  }
  {
    auto f = open_out(dir / "errors.tsv");
    write_errors(f, res.errors);
  }
  write_grid(dir / "ref_grid.tsv", res.ref_grid);
  nlohmann::json report = to_json(res.report);
  report["bpm"] = res.bpm;
  if (a.no_timings) {
    report.erase("mean_feature_latency_ms");
    report.erase("mean_align_latency_ms");
  }
  {
    auto f = open_out(dir / "report.json");
    f << report.dump(2) << '\n';
  }
  out << "wrote " << dir.string() << " (" << res.events.size() << " frames, " << res.errors.size() << " beats)\n";
  return 0;
}

struct RenderArgs {
  std::string score, wav = "reference.wav", grid = "ref_grid.tsv";
  double bpm = 120.0;
  ClockArgs clock;
};

inline int do_render(const RenderArgs& a, std::ostream& out, std::ostream& err) {
  const ScoreDocument doc = read_midi(a.score);
  RenderConfig rc;
  rc.bpm = a.bpm;
  rc.clock = a.clock.clock();
  rc.validate();
  auto r = render_reference(doc, rc);
  std::vector<std::string> warnings = doc.warnings;
  warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
  const BeatGrid grid = beat_grid(doc, a.bpm, &warnings);
  for (const auto& w : warnings)
    err << "warning: " << w << '\n';
  wav::write(a.wav, r.audio);
  write_grid(a.grid, grid);
  out << "wrote " << a.wav << " (" << r.audio.duration() << " s) and " << a.grid << '\n';
  return 0;
}

struct EvalArgs {
  std::string path, ann, grid, error_mode = "detection", out;
  ClockArgs clock;
};

inline int do_eval(const EvalArgs& a, std::ostream& out, std::ostream&) {
  const ErrorMode mode = parse_enum(a.error_mode, error_mode_from_string, "error mode");
  const FrameClock clock = a.clock.clock();
  WarpingPath path;
  {
    std::ifstream f(a.path);
    if (!f)
      throw std::runtime_error("cannot open " + a.path);
    path = read_path(f);
  }
  const BeatAnnotations ann = read_annotations(a.ann);
  const BeatGrid grid = read_grid(a.grid);
  const auto errors = compute_errors(path, ann, grid, clock, mode);
  const std::string doc = to_json(metrics(errors)).dump(2);
  if (a.out.empty()) {
    out << doc << '\n';
  } else {
    auto f = open_out(a.out);
    f << doc << '\n';
  }
  return 0;
}

struct SynthArgs {
  std::string out = "fixture";
  std::uint32_t index = 1;
  int measures = 30;
  bool dry = false;
};

inline int do_synth(const SynthArgs& a, std::ostream& out, std::ostream&) {
  synthetic::SuiteConfig cfg;
  cfg.measures = a.measures;
  if (a.dry) {
    cfg.noise = 0.0;
    cfg.expression = {};
    cfg.room.wet = 0.0;
  }
  const auto piece = synthetic::suite_piece(a.index, cfg);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  write_midi(dir / "score.mid", piece.score);
  wav::write(dir / "perf.wav", piece.performance.audio);
  {
    auto f = open_out(dir / "ann.tsv");
    f << "beat\ttime\n";
    write_beat_tsv(f, piece.performance.annotations);
  }
  out << "wrote " << dir.string() << " (" << piece.performance.annotations.size() << " beats)\n";
  return 0;
}

struct BenchArgs {
  int measures = 16;
};

inline int do_bench(const BenchArgs& a, std::ostream& out, std::ostream&) {
  BenchOptions o;
  o.measures = a.measures;
  print_bench(out, bench(o), 1000.0 / FrameClock{}.frame_rate());
  return 0;
}

}  // namespace cli_detail

/// Entry point shared by the `scorefollow` tool and the tests.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Real-time score following: simulation, rendering, evaluation and benchmarking"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Follow a performance against a score and write the results");
  run_cmd->add_option("--score", run.score, "Score MIDI file")->required();
  run_cmd->add_option("--perf", run.perf, "Performance WAV file")->required();
  run_cmd->add_option("--ann", run.ann, "Beat annotations TSV (beat, seconds)")->required();
  run_cmd->add_option("--out", run.out, "Output directory")->capture_default_str();
  run_cmd->add_option("--feature", run.feature, "chroma | mel | mfcc | lse")->capture_default_str();
  run_cmd->add_option("--follower", run.follower, "dixon | arzt | hmm")->capture_default_str();
  run_cmd->add_option("--bpm", run.bpm, "Reference tempo in annotated beats per minute, or 'auto'")
      ->capture_default_str();
  run_cmd->add_option("--error-mode", run.error_mode, "detection | transfer")->capture_default_str();
  run_cmd->add_option("--metric", run.metric, "cosine | l1 | l2 (default: cosine)");
  run_cmd->add_option("--chunk", run.chunk, "Samples per simulated audio callback")->capture_default_str();
  run_cmd->add_flag("--no-timings", run.no_timings, "Leave wall-clock latencies out of the outputs");
  run_cmd->add_option("--fft-size", run.fft_size, "Analysis window length in samples");
  run_cmd->add_option("--window-size", run.window_size, "OLTW band length in frames");
  run_cmd->add_option("--max-run-count", run.max_run_count, "OLTW cap on same-direction steps");
  run_cmd->add_option("--backtrack", run.backtrack, "Arzt frames re-evaluated behind the pointer");
  run_cmd->add_option("--lookahead", run.lookahead, "Arzt frames computed ahead of the pointer");
  run_cmd->add_option("--estimate-margin", run.estimate_margin, "Dixon near-tie slack for the estimate");
  run_cmd->add_option("--p-stay", run.p_stay, "HMM self-transition probability");
  run_cmd->add_option("--lambda", run.lambda, "HMM forward-jump decay");
  run_cmd->add_option("--max-jump", run.max_jump, "HMM longest forward jump in frames");
  run_cmd->add_option("--tau", run.tau, "HMM observation temperature");
  add_clock(*run_cmd, run.clock);

  RenderArgs render;
  auto* render_cmd = app.add_subcommand("render", "Render a score to WAV and write its beat grid");
  render_cmd->add_option("--score", render.score, "Score MIDI file")->required();
  render_cmd->add_option("--bpm", render.bpm, "Tempo in quarter notes per minute (multiple of 20)")
      ->capture_default_str();
  render_cmd->add_option("--out-wav", render.wav, "Output WAV")->capture_default_str();
  render_cmd->add_option("--out-grid", render.grid, "Output beat grid TSV")->capture_default_str();
  add_clock(*render_cmd, render.clock);

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Recompute metrics from a dumped path");
  eval_cmd->add_option("--path", ev.path, "Path TSV (u, v)")->required();
  eval_cmd->add_option("--ann", ev.ann, "Beat annotations TSV")->required();
  eval_cmd->add_option("--ref-grid", ev.grid, "Reference beat grid TSV")->required();
  eval_cmd->add_option("--error-mode", ev.error_mode, "detection | transfer")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Write the report here instead of stdout");
  add_clock(*eval_cmd, ev.clock);

  BenchArgs bn;
  auto* bench_cmd = app.add_subcommand("bench", "Latency table over features x followers");
  bench_cmd->add_option("--measures", bn.measures, "Length of the synthetic piece")->capture_default_str();

  SynthArgs sy;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic score, performance and annotations");
  synth_cmd->add_option("--out", sy.out, "Output directory")->capture_default_str();
  synth_cmd->add_option("--index", sy.index, "Piece index (seed)")->capture_default_str();
  synth_cmd->add_option("--measures", sy.measures, "Number of measures")->capture_default_str();
  synth_cmd->add_flag("--dry", sy.dry, "No noise, room or expressive deviations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run_cmd) return do_run(run, out, err);
    if (*render_cmd) return do_render(render, out, err);
    if (*eval_cmd) return do_eval(ev, out, err);
    if (*bench_cmd) return do_bench(bn, out, err);
    if (*synth_cmd) return do_synth(sy, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace scorefollow
