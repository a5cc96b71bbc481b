#pragma once

// Deterministic additive synthesis of a score, plus tempo rounding and the
// time maps used to place notes.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include "scorefollow/core.hpp"
#include "scorefollow/score/midi.hpp"

namespace scorefollow {

/// Nearest multiple of 20 BPM; exact midpoints round up.
inline double round_tempo(double avg_bpm) {
  if (!(avg_bpm > 0.0))
    throw InputError("round_tempo: tempo must be positive");
  return std::max(20.0, 20.0 * std::floor(avg_bpm / 20.0 + 0.5));
}

/// Monotone map from score position (quarter-note beats) to seconds,
/// piecewise linear between knots and extrapolated from the end segments.
class TimeMap {
public:
  static TimeMap constant(double bpm) {
    if (!(bpm > 0.0))
      throw InputError("TimeMap: bpm must be positive");
    return TimeMap({{0.0, 0.0}, {1.0, 60.0 / bpm}});
  }

  explicit TimeMap(std::vector<BeatEntry> knots) : grid_(std::move(knots)) {
    if (grid_.size() < 2)
      throw InputError("TimeMap: need at least two knots");
  }

  double seconds(double beat) const { return grid_.time_of(beat); }
  double beat(double seconds) const { return interp_beat(grid_, seconds); }
  const BeatGrid& knots() const noexcept { return grid_; }

private:
  BeatGrid grid_;
};

struct RenderConfig {
  double bpm = 120.0;  // quarter notes per minute, after rounding
  FrameClock clock{};
  int partials = 8;
  /// Partial p has relative amplitude rolloff^(p-1).
  double partial_rolloff = 0.5;
  /// Partial p decays as exp(-decay * p * t) while the key is held.
  double decay = 0.8;
  double attack = 0.010;
  double release = 0.050;
  double peak = 0.9;
  int min_pitch = 21;
  int max_pitch = 108;

  void validate() const {
    if (!(bpm > 0.0) || std::fmod(bpm, 20.0) != 0.0)
      throw ConfigError("RenderConfig: bpm must be a positive multiple of 20");
    if (partials < 1 || !(attack >= 0.0) || !(release >= 0.0) || !(decay >= 0.0))
      throw ConfigError("RenderConfig: invalid envelope");
  }
};

inline double midi_to_hz(int pitch) { return 440.0 * std::pow(2.0, (pitch - 69) / 12.0); }

struct Rendering {
  AudioBuffer audio;
  std::vector<std::string> warnings;
};

namespace detail {

inline void render_note(std::vector<double>& out, const Note& note, double start_s, double end_s,
                        const RenderConfig& cfg) {
  const double sr = cfg.clock.sample_rate();
  const auto first = static_cast<std::size_t>(std::llround(start_s * sr));
  const auto hold = static_cast<std::size_t>(std::llround((end_s - start_s) * sr));
  const auto rel = static_cast<std::size_t>(std::llround(cfg.release * sr));
  const auto atk = static_cast<std::size_t>(std::llround(cfg.attack * sr));
  const std::size_t total = hold + rel;
  if (out.size() < first + total)
    out.resize(first + total, 0.0);

  const double f0 = midi_to_hz(note.pitch);
  const double gain = note.velocity / 127.0;
  for (int p = 1; p <= cfg.partials; ++p) {
    const double f = f0 * p;
    if (f >= sr / 2)
      break;
    const double amp = gain * std::pow(cfg.partial_rolloff, p - 1);
    // Phasor recursion: one complex multiply per sample instead of sin().
    const std::complex<double> rot = std::polar(1.0, 2.0 * std::numbers::pi * f / sr);
    const double fall = std::exp(-cfg.decay * p / sr);
    std::complex<double> z{1.0, 0.0};
    double env = 1.0;
    double at_release = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
      double e;
      if (i < hold) {
        e = env * (i < atk ? static_cast<double>(i) / static_cast<double>(atk) : 1.0);
        env *= fall;
        at_release = e;
      } else {
        e = at_release * (1.0 - static_cast<double>(i - hold) / static_cast<double>(rel));
      }
      out[first + i] += amp * e * z.imag();
      z *= rot;
      if ((i & 1023) == 1023)
        z /= std::abs(z);
    }
  }
}

}  // namespace detail

/// Sum of all notes placed by `map`, before peak normalisation. Notes outside
/// the configured pitch range are skipped with a warning. The output is
/// padded with silence to a whole number of hops.
inline Rendering render_unnormalised(const ScoreDocument& score, const TimeMap& map, const RenderConfig& cfg) {
  Rendering r;
  r.audio.sample_rate = cfg.clock.sample_rate();
  for (const auto& n : score.notes) {
    if (n.pitch < cfg.min_pitch || n.pitch > cfg.max_pitch) {
      r.warnings.push_back("note pitch " + std::to_string(n.pitch) + " at beat " + std::to_string(n.onset) +
                           " outside piano range; skipped");
      continue;
    }
    detail::render_note(r.audio.samples, n, map.seconds(n.onset), map.seconds(n.onset + n.duration), cfg);
  }
  const std::size_t hop = cfg.clock.hop();
  if (const std::size_t rem = r.audio.samples.size() % hop; rem != 0)
    r.audio.samples.resize(r.audio.samples.size() + hop - rem, 0.0);
  return r;
}

inline void peak_normalise(std::vector<double>& samples, double peak) {
  double m = 0.0;
  for (double s : samples)
    m = std::max(m, std::abs(s));
  if (m > 0.0)
    for (double& s : samples)
      s *= peak / m;
}

inline Rendering render(const ScoreDocument& score, const TimeMap& map, const RenderConfig& cfg) {
  Rendering r = render_unnormalised(score, map, cfg);
  peak_normalise(r.audio.samples, cfg.peak);
  return r;
}

/// Reference rendering at the constant tempo `cfg.bpm`.
inline Rendering render_reference(const ScoreDocument& score, const RenderConfig& cfg) {
  cfg.validate();
  return render(score, TimeMap::constant(cfg.bpm), cfg);
}

}  // namespace scorefollow
