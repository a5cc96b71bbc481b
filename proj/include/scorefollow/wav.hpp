#pragma once

// Minimal RIFF/WAVE codec: PCM 16-bit and IEEE float 32-bit in, float 32-bit
// out. Multichannel input is averaged to mono.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "scorefollow/core.hpp"

namespace scorefollow::wav {

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }

inline void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}
inline void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace detail

inline AudioBuffer decode(const std::vector<unsigned char>& bytes) {
  using detail::le16;
  using detail::le32;
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw ParseError("wav: not a RIFF/WAVE file", 0);

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  bool have_fmt = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) {
      if (std::memcmp(chunk, "data", 4) != 0)
        throw ParseError("wav: chunk overruns file", pos);
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16)
        throw ParseError("wav: fmt chunk too short", pos);
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == 0xFFFE && len >= 26)  // WAVE_FORMAT_EXTENSIBLE: subformat GUID starts at +24
        format = le16(chunk + 32);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      // Tolerate truncated data chunks (streaming writers leave len unset).
      data_len = std::min<std::size_t>(len, bytes.size() - body);
    }
    pos = body + len + (len & 1u);
  }
  if (!have_fmt)
    throw ParseError("wav: missing fmt chunk");
  if (!data)
    throw ParseError("wav: missing data chunk");
  if (channels == 0 || rate == 0)
    throw ParseError("wav: zero channels or sample rate");

  const bool pcm16 = format == 1 && bits == 16;
  const bool f32 = format == 3 && bits == 32;
  if (!pcm16 && !f32)
    throw ParseError("wav: unsupported encoding (format " + std::to_string(format) + ", " + std::to_string(bits) +
                     " bits)");

  const std::size_t width = bits / 8;
  const std::size_t frames = data_len / (width * channels);
  AudioBuffer out;
  out.sample_rate = rate;
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * width;
      if (pcm16) {
        acc += static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        const std::uint32_t u = le32(p);
        float f;
        std::memcpy(&f, &u, 4);
        acc += f;
      }
    }
    out.samples[i] = acc / channels;
  }
  return out;
}

inline std::vector<unsigned char> encode_float(const AudioBuffer& audio) {
  using detail::put16;
  using detail::put32;
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  std::vector<unsigned char> out;
  out.reserve(44 + 4 * std::size_t(n));
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + 4 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 3);  // IEEE float
  put16(out, 1);
  put32(out, rate);
  put32(out, rate * 4);
  put16(out, 4);
  put16(out, 32);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, 4 * n);
  for (double s : audio.samples) {
    const float f = static_cast<float>(s);
    std::uint32_t u;
    std::memcpy(&u, &f, 4);
    put32(out, u);
  }
  return out;
}

/// Linear-interpolation resampling. Deterministic, not high quality.
inline AudioBuffer resample_linear(const AudioBuffer& in, double target_rate) {
  if (in.sample_rate == target_rate || in.samples.empty())
    return AudioBuffer{in.samples, target_rate};
  const double step = in.sample_rate / target_rate;
  const auto n = static_cast<std::size_t>(std::floor(static_cast<double>(in.samples.size() - 1) / step)) + 1;
  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) * step;
    const auto k = static_cast<std::size_t>(x);
    const double frac = x - static_cast<double>(k);
    const double a = in.samples[k];
    const double b = k + 1 < in.samples.size() ? in.samples[k + 1] : a;
    out.samples[i] = a + (b - a) * frac;
  }
  return out;
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f)
    throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

/// Reads a WAV file and converts it to mono at `target_rate`.
inline AudioBuffer read(const std::filesystem::path& path, double target_rate) {
  try {
    return resample_linear(decode(read_bytes(path)), target_rate);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write(const std::filesystem::path& path, const AudioBuffer& audio) {
  const auto bytes = encode_float(audio);
  std::ofstream f(path, std::ios::binary);
  if (!f)
    throw std::runtime_error("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace scorefollow::wav
