#pragma once

// Standard MIDI File (types 0 and 1) reader and a small type-0 writer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "scorefollow/core.hpp"

namespace scorefollow {

struct Note {
  double onset = 0.0;     // quarter-note beats
  double duration = 0.0;  // quarter-note beats
  int pitch = 60;
  int velocity = 64;
  friend bool operator==(const Note&, const Note&) = default;
};

struct TimeSignature {
  double start = 0.0;  // quarter-note beats
  int numerator = 4;
  int denominator = 4;
  friend bool operator==(const TimeSignature&, const TimeSignature&) = default;
};

struct TempoEvent {
  double start = 0.0;  // quarter-note beats
  double bpm = 120.0;  // quarter notes per minute
  friend bool operator==(const TempoEvent&, const TempoEvent&) = default;
};

struct ScoreDocument {
  std::vector<Note> notes;                    // sorted by onset, then pitch
  std::vector<TimeSignature> time_signatures;  // sorted, first one at 0
  std::vector<TempoEvent> tempi;
  std::vector<std::string> warnings;

  /// Quarter-note position where the last note ends (0 for an empty score).
  double end() const noexcept {
    double e = 0.0;
    for (const auto& n : notes)
      e = std::max(e, n.onset + n.duration);
    return e;
  }

  void normalise() {
    std::stable_sort(notes.begin(), notes.end(), [](const Note& a, const Note& b) {
      return a.onset != b.onset ? a.onset < b.onset : a.pitch < b.pitch;
    });
    std::stable_sort(time_signatures.begin(), time_signatures.end(),
                     [](const TimeSignature& a, const TimeSignature& b) { return a.start < b.start; });
    // Later events at the same position override earlier ones.
    std::vector<TimeSignature> dedup;
    for (const auto& ts : time_signatures) {
      if (!dedup.empty() && dedup.back().start == ts.start)
        dedup.back() = ts;
      else
        dedup.push_back(ts);
    }
    time_signatures = std::move(dedup);
    if (time_signatures.empty() || time_signatures.front().start > 0.0)
      time_signatures.insert(time_signatures.begin(), TimeSignature{0.0, 4, 4});
    std::stable_sort(tempi.begin(), tempi.end(), [](const TempoEvent& a, const TempoEvent& b) { return a.start < b.start; });
  }
};

namespace detail {

class MidiReader {
public:
  explicit MidiReader(const std::vector<unsigned char>& bytes) : b_(bytes) {}

  std::size_t pos() const noexcept { return pos_; }
  void seek(std::size_t p) noexcept { pos_ = p; }
  bool at_end(std::size_t limit) const noexcept { return pos_ >= limit; }

  std::uint8_t u8(std::size_t limit) {
    if (pos_ >= limit)
      throw ParseError("midi: unexpected end of data", pos_);
    return b_[pos_++];
  }
  std::uint32_t be(std::size_t n, std::size_t limit) {
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < n; ++i)
      v = (v << 8) | u8(limit);
    return v;
  }
  std::uint32_t vlq(std::size_t limit) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t c = u8(limit);
      v = (v << 7) | (c & 0x7f);
      if (!(c & 0x80))
        return v;
    }
    throw ParseError("midi: variable-length quantity longer than 4 bytes", pos_);
  }
  void expect_tag(const char* tag) {
    for (int i = 0; i < 4; ++i) {
      if (pos_ + static_cast<std::size_t>(i) >= b_.size() || b_[pos_ + static_cast<std::size_t>(i)] != static_cast<unsigned char>(tag[i]))
        throw ParseError(std::string("midi: expected chunk '") + tag + "'", pos_);
    }
    pos_ += 4;
  }

private:
  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses an SMF into quarter-note-based notes, time signatures and tempo
/// events. Note-offs close the oldest open note of the same channel and
/// pitch; notes still open at the end of their track are closed there with a
/// warning.
inline ScoreDocument parse_midi(const std::vector<unsigned char>& bytes) {
  detail::MidiReader r(bytes);
  const std::size_t n = bytes.size();
  r.expect_tag("MThd");
  const std::uint32_t hlen = r.be(4, n);
  if (hlen < 6)
    throw ParseError("midi: header chunk too short", r.pos());
  const std::size_t header_body = r.pos();
  const std::uint32_t format = r.be(2, n);
  const std::uint32_t ntracks = r.be(2, n);
  const std::uint32_t division = r.be(2, n);
  if (format > 1)
    throw ParseError("midi: format " + std::to_string(format) + " is not supported", header_body);
  if (division & 0x8000)
    throw ParseError("midi: SMPTE time division is not supported", header_body + 4);
  if (division == 0)
    throw ParseError("midi: zero ticks per quarter note", header_body + 4);
  r.seek(header_body + hlen);
  const double tpq = static_cast<double>(division);

  ScoreDocument doc;
  for (std::uint32_t track = 0; track < ntracks; ++track) {
    r.expect_tag("MTrk");
    const std::uint32_t len = r.be(4, n);
    const std::size_t end = r.pos() + len;
    if (end > n)
      throw ParseError("midi: track " + std::to_string(track) + " overruns file", r.pos() - 8);

    std::map<std::pair<int, int>, std::deque<std::pair<std::uint64_t, int>>> open;
    std::uint64_t tick = 0;
    std::uint8_t status = 0;
    auto close = [&](int ch, int pitch, std::uint64_t at) {
      auto it = open.find({ch, pitch});
      if (it == open.end() || it->second.empty())
        return;
      const auto [on, vel] = it->second.front();
      it->second.pop_front();
      if (at > on)
        doc.notes.push_back({on / tpq, static_cast<double>(at - on) / tpq, pitch, vel});
    };

    while (!r.at_end(end)) {
      tick += r.vlq(end);
      const std::size_t ev = r.pos();
      std::uint8_t byte = r.u8(end);
      if (byte < 0x80) {
        if (status == 0)
          throw ParseError("midi: running status without a preceding status byte", ev);
        r.seek(ev);
        byte = status;
      } else if (byte < 0xF0) {
        status = byte;
      }

      if (byte == 0xFF) {
        const std::uint8_t type = r.u8(end);
        const std::uint32_t mlen = r.vlq(end);
        const std::size_t body = r.pos();
        if (body + mlen > end)
          throw ParseError("midi: meta event overruns track", ev);
        if (type == 0x51 && mlen == 3) {
          const std::uint32_t us = r.be(3, end);
          if (us > 0)
            doc.tempi.push_back({tick / tpq, 60'000'000.0 / us});
        } else if (type == 0x58 && mlen >= 2) {
          const int num = r.u8(end);
          const int pow2 = r.u8(end);
          if (num == 0 || pow2 > 6)
            throw ParseError("midi: invalid time signature", body);
          doc.time_signatures.push_back({tick / tpq, num, 1 << pow2});
        } else if (type == 0x2F) {
          r.seek(body + mlen);
          break;
        }
        r.seek(body + mlen);
        continue;
      }
      if (byte == 0xF0 || byte == 0xF7) {
        const std::uint32_t slen = r.vlq(end);
        r.seek(r.pos() + slen);
        if (r.pos() > end)
          throw ParseError("midi: sysex overruns track", ev);
        continue;
      }
      if (byte >= 0xF0)
        throw ParseError("midi: unexpected system message", ev);

      const int kind = byte & 0xF0;
      const int ch = byte & 0x0F;
      if (kind == 0xC0 || kind == 0xD0) {
        r.u8(end);
        continue;
      }
      const int d1 = r.u8(end);
      const int d2 = r.u8(end);
      if (d1 > 127 || d2 > 127)
        throw ParseError("midi: data byte out of range", ev);
      if (kind == 0x90 && d2 > 0) {
        open[{ch, d1}].emplace_back(tick, d2);
      } else if (kind == 0x80 || kind == 0x90) {
        close(ch, d1, tick);
      }
    }

    for (auto& [key, q] : open) {
      while (!q.empty()) {
        doc.warnings.push_back("track " + std::to_string(track) + ": note " + std::to_string(key.second) +
                               " not terminated; closed at track end");
        close(key.first, key.second, tick);  // zero-length leftovers are dropped
      }
    }
    r.seek(end);
  }

  doc.normalise();
  return doc;
}

inline ScoreDocument read_midi(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw std::runtime_error("cannot open " + path.string());
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  try {
    return parse_midi(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

/// Writes a format-0 SMF (480 ticks per quarter) holding the score's notes,
/// time signatures and tempo events.
inline std::vector<unsigned char> encode_midi(const ScoreDocument& doc) {
  constexpr int tpq = 480;
  struct Ev {
    std::uint64_t tick;
    int order;  // meta < note-off < note-on at equal ticks
    std::vector<unsigned char> data;
  };
  std::vector<Ev> evs;
  auto ticks = [](double beats) { return static_cast<std::uint64_t>(std::llround(beats * tpq)); };
  for (const auto& ts : doc.time_signatures) {
    int pow2 = 0;
    while ((1 << pow2) < ts.denominator)
      ++pow2;
    evs.push_back({ticks(ts.start), 0,
                   {0xFF, 0x58, 0x04, static_cast<unsigned char>(ts.numerator), static_cast<unsigned char>(pow2), 24, 8}});
  }
  for (const auto& t : doc.tempi) {
    const auto us = static_cast<std::uint32_t>(std::lround(60'000'000.0 / t.bpm));
    evs.push_back({ticks(t.start), 0,
                   {0xFF, 0x51, 0x03, static_cast<unsigned char>(us >> 16), static_cast<unsigned char>(us >> 8),
                    static_cast<unsigned char>(us)}});
  }
  for (const auto& nt : doc.notes) {
    const auto p = static_cast<unsigned char>(nt.pitch);
    evs.push_back({ticks(nt.onset), 2, {0x90, p, static_cast<unsigned char>(nt.velocity)}});
    evs.push_back({ticks(nt.onset + nt.duration), 1, {0x80, p, 0}});
  }
  std::stable_sort(evs.begin(), evs.end(),
                   [](const Ev& a, const Ev& b) { return a.tick != b.tick ? a.tick < b.tick : a.order < b.order; });

  std::vector<unsigned char> track;
  std::uint64_t last = 0;
  auto vlq = [&](std::uint64_t v) {
    unsigned char buf[5];
    int k = 0;
    buf[k++] = static_cast<unsigned char>(v & 0x7f);
    while (v >>= 7)
      buf[k++] = static_cast<unsigned char>(0x80 | (v & 0x7f));
    while (k)
      track.push_back(buf[--k]);
  };
  for (const auto& e : evs) {
    vlq(e.tick - last);
    last = e.tick;
    track.insert(track.end(), e.data.begin(), e.data.end());
  }
  vlq(0);
  track.insert(track.end(), {0xFF, 0x2F, 0x00});

  std::vector<unsigned char> out{'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, 0, 0, 1, tpq >> 8, tpq & 0xff, 'M', 'T', 'r', 'k'};
  const auto len = static_cast<std::uint32_t>(track.size());
  for (int s = 24; s >= 0; s -= 8)
    out.push_back(static_cast<unsigned char>(len >> s));
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

inline void write_midi(const std::filesystem::path& path, const ScoreDocument& doc) {
  const auto bytes = encode_midi(doc);
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw std::runtime_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace scorefollow
