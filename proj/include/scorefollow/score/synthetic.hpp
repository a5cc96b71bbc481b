#pragma once

// Seeded synthetic scores and "performances" of them: the same notes placed
// by a warped time map and rendered with a different timbre. Used by the
// benchmark, the acceptance suite and the `synth` CLI command.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "scorefollow/core.hpp"
#include "scorefollow/score/beat_grid.hpp"
#include "scorefollow/score/midi.hpp"
#include "scorefollow/score/render.hpp"

namespace scorefollow::synthetic {

/// Two-hand texture: a held bass, block chords on the beats and a
/// random-walk melody in the home key, one chord per measure.
inline ScoreDocument score(std::uint32_t seed, int measures, TimeSignature meter = {0.0, 4, 4}) {
  std::mt19937 rng(seed);
  auto uniform = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

  static constexpr std::array<int, 7> major{0, 2, 4, 5, 7, 9, 11};
  static constexpr std::array<int, 6> progression_degrees{0, 3, 4, 5, 1, 4};
  const int key = uniform(0, 11);
  auto degree_pitch = [&](int degree, int octave_base) {
    const int oct = degree >= 0 ? degree / 7 : -((-degree + 6) / 7);
    const int idx = ((degree % 7) + 7) % 7;
    return octave_base + key + 12 * oct + major[static_cast<std::size_t>(idx)];
  };

  ScoreDocument doc;
  meter.start = 0.0;
  doc.time_signatures.push_back(meter);
  const MeterBeats mb = meter_beats(meter);
  const double measure_len = meter.numerator * 4.0 / meter.denominator;

  int melody = uniform(0, 6);
  std::size_t last_melody = 0;
  auto held_from_previous_beat = [&](const ScoreDocument& d, double pos) {
    return !d.notes.empty() && d.notes[last_melody].pitch >= 60 &&
           d.notes[last_melody].onset + d.notes[last_melody].duration > pos - mb.length * 0.5;
  };
  for (int m = 0; m < measures; ++m) {
    const double start = m * measure_len;
    const int root = m == 0 ? 0 : progression_degrees[static_cast<std::size_t>(uniform(0, 5))];
    const int vel = uniform(60, 90);
    doc.notes.push_back({start, measure_len, degree_pitch(root, 36), vel});
    for (int b = 0; b < mb.per_measure; ++b) {
      const double pos = start + b * mb.length;
      if (b % 2 == 0)
        for (int k : {0, 2, 4})
          doc.notes.push_back({pos, mb.length * 0.9, degree_pitch(root + k, 48), vel - 10});

      // Melody: one long note, two halves, or three short notes per beat;
      // or the previous note is held through the beat.
      const int pattern = uniform(0, 3);
      if (pattern == 3 && held_from_previous_beat(doc, pos)) {
        doc.notes[last_melody].duration += mb.length;
        continue;
      }
      const int pieces = std::min(pattern, 2) + 1;
      for (int k = 0; k < pieces; ++k) {
        melody = std::clamp(melody + uniform(-2, 2), -3, 10);
        const double d = mb.length / pieces;
        last_melody = doc.notes.size();
        doc.notes.push_back({pos + k * d, d * 0.95, degree_pitch(melody, 72), uniform(70, 105)});
      }
    }
  }
  doc.tempi.push_back({0.0, 120.0});
  doc.normalise();
  return doc;
}

/// Constant-tempo map at `speed` times `bpm` (0.8 = slower, longer).
inline TimeMap scaled(double bpm, double speed) { return TimeMap::constant(bpm * speed); }

/// Tempo that drifts smoothly between random multipliers in
/// [1 - depth, 1 + depth], drawn every `segment` quarter notes.
inline TimeMap fluctuating(double bpm, std::uint32_t seed, double end_beat, double depth = 0.2, double segment = 4.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> mult(1.0 - depth, 1.0 + depth);
  const auto segments = static_cast<std::size_t>(std::ceil(end_beat / segment)) + 2;
  std::vector<double> tempo(segments + 1);
  for (double& t : tempo)
    t = bpm * mult(rng);

  constexpr double step = 0.05;
  std::vector<BeatEntry> knots{{0.0, 0.0}};
  double sec = 0.0;
  for (double b = 0.0; b < (static_cast<double>(segments) - 1.0) * segment; b += step) {
    const double x = (b + step / 2) / segment;
    const auto i = static_cast<std::size_t>(x);
    const double local = tempo[i] + (tempo[i + 1] - tempo[i]) * (x - static_cast<double>(i));
    sec += step * 60.0 / local;
    knots.push_back({b + step, sec});
  }
  return TimeMap(std::move(knots));
}

/// Timbre of the synthetic "performer": brighter, faster-decaying partials
/// than the reference synthesiser.
inline RenderConfig performer_timbre(RenderConfig base = {}) {
  base.partial_rolloff = 0.6;
  base.decay = 1.3;
  base.attack = 0.005;
  return base;
}

/// Per-note deviations of a human player from the printed score. All draws
/// are seeded; the default is an exact performance.
struct Expression {
  double onset_jitter = 0.0;     // std-dev of onset shifts, in quarter notes
  int velocity_jitter = 0;       // uniform +/- range
  double min_articulation = 1.0; // duration factor drawn from [min, max]
  double max_articulation = 1.0;
};

/// A moderately loose player: about 10 ms onset scatter at 120 BPM,
/// uneven dynamics, anything from detached to slightly overlapped notes.
inline Expression human() { return {0.02, 15, 0.6, 1.1}; }

inline ScoreDocument apply(const ScoreDocument& doc, const Expression& ex, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> shift(0.0, ex.onset_jitter > 0.0 ? ex.onset_jitter : 1.0);
  std::uniform_int_distribution<int> vel(-ex.velocity_jitter, ex.velocity_jitter);
  std::uniform_real_distribution<double> art(ex.min_articulation, ex.max_articulation);
  ScoreDocument out = doc;
  for (Note& n : out.notes) {
    if (ex.onset_jitter > 0.0)
      n.onset = std::max(0.0, n.onset + shift(rng));
    if (ex.velocity_jitter > 0)
      n.velocity = std::clamp(n.velocity + vel(rng), 1, 127);
    n.duration *= art(rng);
  }
  out.normalise();
  return out;
}

/// Schroeder room: four parallel feedback combs and two series all-passes,
/// mixed with the dry signal. `rt60` is the decay time in seconds.
inline void reverberate(std::vector<double>& x, double sample_rate, double rt60, double wet) {
  if (wet <= 0.0 || x.empty())
    return;
  const double scale = sample_rate / 44100.0;
  std::vector<double> y(x.size(), 0.0);
  for (int base : {1557, 1617, 1491, 1422}) {
    const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(base * scale)));
    const double g = std::pow(10.0, -3.0 * static_cast<double>(len) / sample_rate / rt60);
    std::vector<double> line(len, 0.0);
    for (std::size_t n = 0, i = 0; n < x.size(); ++n, i = (i + 1) % len) {
      const double out = line[i];
      line[i] = x[n] + g * out;
      y[n] += 0.25 * out;
    }
  }
  for (int base : {225, 556}) {
    const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(base * scale)));
    std::vector<double> line(len, 0.0);
    for (std::size_t n = 0, i = 0; n < y.size(); ++n, i = (i + 1) % len) {
      const double delayed = line[i];
      const double v = y[n] + 0.5 * delayed;
      line[i] = v;
      y[n] = delayed - 0.5 * v;
    }
  }
  for (std::size_t n = 0; n < x.size(); ++n)
    x[n] = (1.0 - wet) * x[n] + wet * y[n];
}

struct Room {
  double rt60 = 1.2;
  double wet = 0.0;
};

struct Performance {
  AudioBuffer audio;
  std::vector<BeatEntry> annotations;  // (beat index, performance seconds)
};

/// Renders `doc` through `map`, applies expression and room, and annotates
/// every reference beat that falls inside the piece at its unperturbed
/// position. `noise` adds seeded white noise at that RMS level.
inline Performance perform(const ScoreDocument& doc, const TimeMap& map, const RenderConfig& timbre,
                           double noise = 0.0, std::uint32_t seed = 0, const Expression& ex = {},
                           const Room& room = {}) {
  Performance p;
  p.audio = render(apply(doc, ex, seed ^ 0x9e3779b9u), map, timbre).audio;
  reverberate(p.audio.samples, p.audio.sample_rate, room.rt60, room.wet);
  if (noise > 0.0) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> g(0.0, noise);
    for (double& s : p.audio.samples)
      s += g(rng);
  }
  const double end = doc.end();
  const auto layout = beat_positions(doc);
  for (std::size_t i = 0; i < layout.positions.size(); ++i)
    if (layout.positions[i] < end)
      p.annotations.push_back({static_cast<double>(i), map.seconds(layout.positions[i])});
  return p;
}

/// Settings of the evaluation suite: seeded pieces played with +/-20 %
/// tempo drift by the performer timbre in a small room.
struct SuiteConfig {
  int measures = 30;
  double bpm = 120.0;
  double depth = 0.2;
  double noise = 0.01;
  Expression expression = human();
  Room room{1.2, 0.3};
};

struct SuitePiece {
  ScoreDocument score;
  Performance performance;
};

inline SuitePiece suite_piece(std::uint32_t index, const SuiteConfig& cfg = {}) {
  SuitePiece p;
  p.score = score(100 + index, cfg.measures);
  const TimeMap map = fluctuating(cfg.bpm, 200 + index, p.score.end(), cfg.depth);
  p.performance = perform(p.score, map, performer_timbre(), cfg.noise, 300 + index, cfg.expression, cfg.room);
  return p;
}

}  // namespace scorefollow::synthetic
