#include <gtest/gtest.h>

#include <cmath>
#include <initializer_list>

#include "scorefollow/features.hpp"
#include "scorefollow/score/beat_grid.hpp"
#include "scorefollow/score/midi.hpp"
#include "scorefollow/score/render.hpp"
#include "scorefollow/score/synthetic.hpp"

using namespace scorefollow;

namespace {

using Bytes = std::vector<unsigned char>;

Bytes be32(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 8),
          static_cast<unsigned char>(v)};
}

Bytes header(std::uint16_t format, std::uint16_t tracks, std::uint16_t division = 96) {
  Bytes b{'M', 'T', 'h', 'd', 0, 0, 0, 6};
  for (std::uint16_t v : {format, tracks, division}) {
    b.push_back(static_cast<unsigned char>(v >> 8));
    b.push_back(static_cast<unsigned char>(v));
  }
  return b;
}

Bytes track(const Bytes& events) {
  Bytes b{'M', 'T', 'r', 'k'};
  const auto len = be32(static_cast<std::uint32_t>(events.size()));
  b.insert(b.end(), len.begin(), len.end());
  b.insert(b.end(), events.begin(), events.end());
  return b;
}

Bytes smf(std::uint16_t format, std::initializer_list<Bytes> tracks) {
  Bytes b = header(format, static_cast<std::uint16_t>(tracks.size()));
  for (const auto& t : tracks) {
    const auto tb = track(t);
    b.insert(b.end(), tb.begin(), tb.end());
  }
  return b;
}

const Bytes kEnd{0x00, 0xFF, 0x2F, 0x00};

Bytes cat(std::initializer_list<Bytes> parts) {
  Bytes out;
  for (const auto& p : parts)
    out.insert(out.end(), p.begin(), p.end());
  return out;
}

ScoreDocument one_note(int pitch, double beats = 1.0, int velocity = 100) {
  ScoreDocument d;
  d.notes.push_back({0.0, beats, pitch, velocity});
  d.normalise();
  return d;
}

RenderConfig at_bpm(double bpm) {
  RenderConfig c;
  c.bpm = bpm;
  return c;
}

}  // namespace

// ---- MIDI ----

TEST(Midi, SingleNote) {
  // division 96: note-on at 0, note-off after 96 ticks (0x60).
  const auto doc = parse_midi(smf(0, {cat({{0x00, 0x90, 60, 64}, {0x60, 0x80, 60, 0}, kEnd})}));
  ASSERT_EQ(doc.notes.size(), 1u);
  EXPECT_EQ(doc.notes[0], (Note{0.0, 1.0, 60, 64}));
  ASSERT_EQ(doc.time_signatures.size(), 1u);
  EXPECT_EQ(doc.time_signatures[0], (TimeSignature{0.0, 4, 4}));
}

TEST(Midi, OverlappingSamePitchIsFifo) {
  // on@0 (vel 50), on@48 (vel 70), off@96, off@144 (running status for the
  // second off, velocity-0 note-on form).
  const auto doc = parse_midi(smf(0, {cat({{0x00, 0x90, 62, 50},
                                           {0x30, 0x90, 62, 70},
                                           {0x30, 0x80, 62, 0},
                                           {0x30, 0x90, 62, 0},
                                           kEnd})}));
  ASSERT_EQ(doc.notes.size(), 2u);
  EXPECT_EQ(doc.notes[0], (Note{0.0, 1.0, 62, 50}));
  EXPECT_EQ(doc.notes[1], (Note{0.5, 1.0, 62, 70}));
}

TEST(Midi, EmptyTrackGetsDefaultSignature) {
  const auto doc = parse_midi(smf(0, {kEnd}));
  EXPECT_TRUE(doc.notes.empty());
  ASSERT_EQ(doc.time_signatures.size(), 1u);
  EXPECT_EQ(doc.time_signatures[0], (TimeSignature{0.0, 4, 4}));
}

TEST(Midi, Type1MetaEventsAndTracks) {
  const Bytes conductor = cat({{0x00, 0xFF, 0x58, 0x04, 6, 3, 24, 8},       // 6/8
                               {0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20},  // 500000 us
                               kEnd});
  const Bytes part = cat({{0x00, 0xC0, 0x01}, {0x00, 0x91, 67, 80}, {0x81, 0x40, 0x81, 67, 0}, kEnd});
  const auto doc = parse_midi(smf(1, {conductor, part}));
  ASSERT_EQ(doc.notes.size(), 1u);
  EXPECT_EQ(doc.notes[0], (Note{0.0, 2.0, 67, 80}));  // 0x81 0x40 = 192 ticks
  EXPECT_EQ(doc.time_signatures[0], (TimeSignature{0.0, 6, 8}));
  ASSERT_EQ(doc.tempi.size(), 1u);
  EXPECT_DOUBLE_EQ(doc.tempi[0].bpm, 120.0);
}

TEST(Midi, UnterminatedNoteIsClosedWithWarning) {
  const auto doc = parse_midi(smf(0, {cat({{0x00, 0x90, 60, 64}, {0x60, 0x90, 64, 64}, {0x30, 0xFF, 0x2F, 0x00}})}));
  ASSERT_EQ(doc.notes.size(), 2u);
  EXPECT_EQ(doc.notes[0].duration, 1.5);
  EXPECT_EQ(doc.notes[1].duration, 0.5);
  EXPECT_EQ(doc.warnings.size(), 2u);
}

TEST(Midi, MalformedInputReportsOffset) {
  try {
    parse_midi(Bytes{'M', 'T', 'h', 'x'});
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
  auto truncated = smf(0, {cat({{0x00, 0x90, 60, 64}, kEnd})});
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(parse_midi(truncated), ParseError);
  // Running status with no status byte: the fault sits at the first event.
  try {
    parse_midi(smf(0, {cat({{0x00, 60, 64}, kEnd})}));
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.offset(), 14u + 8u + 1u);
  }
  EXPECT_THROW(parse_midi(smf(2, {kEnd})), ParseError);
}

TEST(Midi, EncodeParseRoundTrip) {
  const auto doc = synthetic::score(5, 8, {0.0, 3, 4});
  const auto back = parse_midi(encode_midi(doc));
  ASSERT_EQ(back.notes.size(), doc.notes.size());
  for (std::size_t i = 0; i < doc.notes.size(); ++i) {
    EXPECT_NEAR(back.notes[i].onset, doc.notes[i].onset, 1.0 / 480);
    EXPECT_NEAR(back.notes[i].duration, doc.notes[i].duration, 2.0 / 480);
    EXPECT_EQ(back.notes[i].pitch, doc.notes[i].pitch);
    EXPECT_EQ(back.notes[i].velocity, doc.notes[i].velocity);
  }
  EXPECT_EQ(back.time_signatures, doc.time_signatures);
}

// ---- tempo ----

TEST(RoundTempo, Examples) {
  EXPECT_EQ(round_tempo(113), 120.0);
  EXPECT_EQ(round_tempo(110), 120.0);
  EXPECT_EQ(round_tempo(60), 60.0);
  EXPECT_EQ(round_tempo(129.99), 120.0);
  EXPECT_EQ(round_tempo(3), 20.0);
  EXPECT_THROW(round_tempo(0), InputError);
}

// ---- rendering ----

TEST(Render, EmptyScoreIsSilentAndEmpty) {
  ScoreDocument empty;
  empty.normalise();
  EXPECT_TRUE(render_reference(empty, at_bpm(120)).audio.samples.empty());
}

TEST(Render, A4At60BpmLastsOneBeatPlusReleaseAndPeaksAt440) {
  const auto r = render_reference(one_note(69), at_bpm(60));
  // 1 s hold + 50 ms release, padded to whole hops of 1470 samples.
  EXPECT_EQ(r.audio.samples.size(), 47040u);
  EXPECT_NEAR(r.audio.duration(), 1.0667, 1e-3);
  const std::span<const double> steady(r.audio.samples.data() + 8820, 4096);
  const auto mag = stft_magnitude(steady);
  const auto k = static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
  EXPECT_NEAR(static_cast<double>(k) * 44100.0 / 4096.0, 440.0, 44100.0 / 4096.0);
  double peak = 0.0;
  for (double s : r.audio.samples)
    peak = std::max(peak, std::abs(s));
  EXPECT_NEAR(peak, 0.9, 1e-12);
}

TEST(Render, SimultaneousNotesAdd) {
  ScoreDocument both;
  both.notes = {{0.0, 1.0, 60, 90}, {0.0, 1.0, 67, 70}};
  both.normalise();
  const TimeMap map = TimeMap::constant(120);
  const auto sum = render_unnormalised(both, map, at_bpm(120)).audio.samples;
  const auto a = render_unnormalised(one_note(60, 1.0, 90), map, at_bpm(120)).audio.samples;
  const auto b = render_unnormalised(one_note(67, 1.0, 70), map, at_bpm(120)).audio.samples;
  ASSERT_EQ(sum.size(), a.size());
  for (std::size_t i = 0; i < sum.size(); ++i)
    ASSERT_NEAR(sum[i], a[i] + b[i], 1e-12);
}

TEST(Render, IsDeterministic) {
  const auto doc = synthetic::score(3, 4);
  EXPECT_EQ(render_reference(doc, at_bpm(100)).audio.samples, render_reference(doc, at_bpm(100)).audio.samples);
}

TEST(Render, OutOfRangePitchIsSkippedWithWarning) {
  ScoreDocument d;
  d.notes = {{0.0, 1.0, 20, 90}, {0.0, 1.0, 60, 90}, {1.0, 1.0, 109, 90}};
  d.normalise();
  const auto r = render_reference(d, at_bpm(120));
  EXPECT_EQ(r.warnings.size(), 2u);
  EXPECT_FALSE(r.audio.samples.empty());
}

TEST(Render, BpmMustBeMultipleOfTwenty) {
  EXPECT_THROW(render_reference(one_note(60), at_bpm(110)), ConfigError);
}

TEST(Render, IsolatedNoteChromaMatchesPitchClass) {
  FeatureConfig fc;
  FeatureBank bank(fc);
  for (int pitch = 33; pitch <= 96; pitch += 5) {
    const auto r = render_reference(one_note(pitch, 2.0), at_bpm(120));
    const std::span<const double> steady(r.audio.samples.data() + 4410, 4096);
    std::vector<double> chroma(12);
    bank.chroma(stft_magnitude(steady), chroma);
    const auto pc = static_cast<int>(std::max_element(chroma.begin(), chroma.end()) - chroma.begin());
    EXPECT_EQ(pc, pitch % 12) << "pitch " << pitch;
  }
}

// ---- beat grid ----

namespace {

ScoreDocument measures_of(int num, int den, int count) {
  ScoreDocument d;
  d.time_signatures.push_back({0.0, num, den});
  const double len = num * 4.0 / den;
  d.notes.push_back({0.0, len * count, 60, 80});
  d.normalise();
  return d;
}

}  // namespace

TEST(BeatGridRule, FourFourAt120) {
  const auto g = beat_grid(measures_of(4, 4, 2), 120);
  ASSERT_EQ(g.size(), 8u);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(g[i].beat, static_cast<double>(i));
    EXPECT_DOUBLE_EQ(g[i].time, 0.5 * static_cast<double>(i));
  }
}

TEST(BeatGridRule, CompoundMetersCountDottedBeats) {
  for (auto [num, beats] : {std::pair{6, 2}, std::pair{9, 3}, std::pair{12, 4}}) {
    std::vector<std::string> warnings;
    const auto g = beat_grid(measures_of(num, 8, 1), 120, &warnings);
    EXPECT_EQ(g.size(), static_cast<std::size_t>(beats)) << num << "/8";
    EXPECT_TRUE(warnings.empty());
    if (g.size() > 1)
      EXPECT_DOUBLE_EQ(g[1].time, 0.75);  // dotted quarter at 120 quarters/min
  }
}

TEST(BeatGridRule, IrregularMeterFallsBackWithWarning) {
  std::vector<std::string> warnings;
  const auto g = beat_grid(measures_of(5, 8, 2), 120, &warnings);
  EXPECT_EQ(g.size(), 10u);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_DOUBLE_EQ(g[1].time, 0.25);
}

TEST(BeatGridRule, MeterChangesFollowRegions) {
  ScoreDocument d;
  d.time_signatures = {{0.0, 4, 4}, {4.0, 6, 8}, {7.0, 3, 4}};
  d.notes.push_back({0.0, 10.0, 60, 80});
  d.normalise();
  const auto g = beat_grid(d, 60);
  // 4 quarter beats, 2 dotted beats, 3 quarter beats.
  const std::vector<double> expect{0, 1, 2, 3, 4, 5.5, 7, 8, 9};
  ASSERT_EQ(g.size(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i)
    EXPECT_DOUBLE_EQ(g[i].time, expect[i]);
}

TEST(BeatGridRule, CountMatchesMeasuresAndTimesIncrease) {
  for (auto [num, den] : {std::pair{2, 4}, std::pair{3, 4}, std::pair{4, 4}, std::pair{6, 8}, std::pair{9, 8},
                          std::pair{12, 8}, std::pair{2, 2}}) {
    const auto doc = synthetic::score(9, 7, {0.0, num, den});
    const auto g = beat_grid(doc, 100);
    EXPECT_EQ(g.size(), static_cast<std::size_t>(7 * meter_beats({0.0, num, den}).per_measure));
    for (std::size_t i = 1; i < g.size(); ++i)
      EXPECT_GT(g[i].time, g[i - 1].time);
  }
}

TEST(QuartersPerBeat, FollowsFirstMeter) {
  EXPECT_EQ(quarters_per_beat(measures_of(4, 4, 1)), 1.0);
  EXPECT_EQ(quarters_per_beat(measures_of(6, 8, 1)), 1.5);
  EXPECT_EQ(quarters_per_beat(measures_of(2, 2, 1)), 2.0);
}

// ---- synthetic material ----

TEST(Synthetic, SeededAndDeterministic) {
  EXPECT_EQ(synthetic::score(4, 6).notes, synthetic::score(4, 6).notes);
  EXPECT_NE(synthetic::score(4, 6).notes, synthetic::score(5, 6).notes);
  synthetic::SuiteConfig cfg;
  cfg.measures = 4;
  const auto a = synthetic::suite_piece(2, cfg), b = synthetic::suite_piece(2, cfg);
  EXPECT_EQ(a.performance.audio.samples, b.performance.audio.samples);
  EXPECT_EQ(a.performance.annotations, b.performance.annotations);
}

TEST(Synthetic, FluctuatingTempoStaysInRange) {
  const auto map = synthetic::fluctuating(120.0, 3, 64.0, 0.2);
  for (double b = 0.0; b < 64.0; b += 0.5) {
    const double local = 60.0 * 0.5 / (map.seconds(b + 0.5) - map.seconds(b));
    EXPECT_GE(local, 96.0 - 1e-6);
    EXPECT_LE(local, 144.0 + 1e-6);
  }
}

TEST(Synthetic, AnnotationsFollowTheTimeMap) {
  const auto doc = synthetic::score(1, 4);
  const auto perf = synthetic::perform(doc, synthetic::scaled(120, 0.8), RenderConfig{});
  ASSERT_EQ(perf.annotations.size(), 16u);
  for (const auto& a : perf.annotations)
    EXPECT_NEAR(a.time, a.beat * 60.0 / 96.0, 1e-9);
}
