#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "scorefollow/core.hpp"
#include "scorefollow/score/midi.hpp"
#include "scorefollow/score/render.hpp"

namespace scorefollow {

/// Beat structure of one measure under a time signature.
struct MeterBeats {
  int per_measure = 4;
  double length = 1.0;  // quarter notes per beat
  bool supported = true;
};

/// Simple meters get one beat per denominator unit. 6/8, 9/8 and 12/8 (and
/// their /16 counterparts) are counted in dotted pulses: 2, 3 and 4 beats per
/// measure. Irregular meters such as 5/8 or 7/8 fall back to one beat per
/// denominator unit and are flagged unsupported.
inline MeterBeats meter_beats(const TimeSignature& ts) {
  const double unit = 4.0 / ts.denominator;
  const bool compound = (ts.denominator == 8 || ts.denominator == 16) &&
                        (ts.numerator == 6 || ts.numerator == 9 || ts.numerator == 12);
  if (compound)
    return {ts.numerator / 3, 3.0 * unit, true};
  const bool simple = ts.denominator <= 4 || ts.numerator <= 4;
  return {ts.numerator, unit, simple};
}

struct BeatLayout {
  std::vector<double> positions;  // quarter-note position of every beat
  std::vector<std::string> warnings;
};

/// Beat positions for every measure that starts before the score ends (at
/// least one measure).
inline BeatLayout beat_positions(const ScoreDocument& score) {
  BeatLayout out;
  auto sigs = score.time_signatures;
  if (sigs.empty() || sigs.front().start > 0.0)
    sigs.insert(sigs.begin(), TimeSignature{0.0, 4, 4});
  const double end = std::max(score.end(), 1e-9);

  for (std::size_t i = 0; i < sigs.size(); ++i) {
    const auto& ts = sigs[i];
    if (ts.start >= end)
      break;
    const MeterBeats mb = meter_beats(ts);
    if (!mb.supported)
      out.warnings.push_back("time signature " + std::to_string(ts.numerator) + "/" +
                             std::to_string(ts.denominator) + " unsupported; counting one beat per " +
                             std::to_string(ts.denominator) + "th");
    const double region_end = i + 1 < sigs.size() ? sigs[i + 1].start : std::numeric_limits<double>::infinity();
    const double measure_len = ts.numerator * 4.0 / ts.denominator;
    for (double m = ts.start; m < end && m < region_end; m += measure_len)
      for (int b = 0; b < mb.per_measure; ++b) {
        const double pos = m + b * mb.length;
        if (pos >= region_end)
          break;
        out.positions.push_back(pos);
      }
  }
  return out;
}

/// Reference-axis beat grid of a score rendered at constant `bpm`.
inline BeatGrid beat_grid(const ScoreDocument& score, double bpm, std::vector<std::string>* warnings = nullptr) {
  const TimeMap map = TimeMap::constant(bpm);
  BeatLayout layout = beat_positions(score);
  if (warnings)
    warnings->insert(warnings->end(), layout.warnings.begin(), layout.warnings.end());
  std::vector<BeatEntry> entries;
  entries.reserve(layout.positions.size());
  for (std::size_t i = 0; i < layout.positions.size(); ++i)
    entries.push_back({static_cast<double>(i), map.seconds(layout.positions[i])});
  return BeatGrid(std::move(entries));
}

/// Quarter notes per counted beat at the start of the score; converts an
/// annotated beat tempo into the quarter-note tempo used for rendering.
inline double quarters_per_beat(const ScoreDocument& score) {
  if (score.time_signatures.empty())
    return 1.0;
  return meter_beats(score.time_signatures.front()).length;
}

}  // namespace scorefollow
