#pragma once

// Frame-synchronous audio features: chroma, mel, MFCC and log-spectral
// energy (LSE). The same Processor runs offline over a rendered reference and
// online, chunk by chunk, over a performance stream.

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "scorefollow/core.hpp"

namespace scorefollow {

enum class FeatureKind { chroma, mel, mfcc, lse };

inline std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::chroma: return "chroma";
    case FeatureKind::mel: return "mel";
    case FeatureKind::mfcc: return "mfcc";
    case FeatureKind::lse: return "lse";
  }
  return "?";
}

inline std::optional<FeatureKind> feature_kind_from_string(std::string_view s) {
  for (auto k : {FeatureKind::chroma, FeatureKind::mel, FeatureKind::mfcc, FeatureKind::lse})
    if (to_string(k) == s)
      return k;
  return std::nullopt;
}

struct FeatureConfig {
  FeatureKind kind = FeatureKind::chroma;
  /// 0 selects the per-kind default: 4096 for the pitch features, 2048 for
  /// LSE, which needs onset sharpness more than pitch resolution.
  std::size_t fft_size = 0;
  std::size_t n_mels = 64;
  std::size_t n_mfcc = 13;
  std::size_t lse_bins = 84;
  double lse_gain = 1000.0;
  double f_min = 27.5;
  double f_max = 8000.0;
  /// Frames whose in-band power falls below this are reported as zero vectors.
  double silence_gate = 1e-8;
  FrameClock clock{};

  std::size_t window_size() const noexcept {
    if (fft_size != 0)
      return fft_size;
    return kind == FeatureKind::lse ? 2048 : 4096;
  }

  std::size_t dim() const noexcept {
    switch (kind) {
      case FeatureKind::chroma: return 12;
      case FeatureKind::mel: return n_mels;
      case FeatureKind::mfcc: return n_mfcc;
      case FeatureKind::lse: return lse_bins;
    }
    return 0;
  }

  void validate() const {
    const std::size_t n = window_size();
    if (n < 2 || (n & (n - 1)) != 0)
      throw ConfigError("FeatureConfig: fft_size must be a power of two");
    if (n < clock.hop())
      throw ConfigError("FeatureConfig: fft_size must be at least one hop");
    if (n_mels == 0 || n_mfcc == 0 || lse_bins == 0)
      throw ConfigError("FeatureConfig: band counts must be positive");
    if (kind == FeatureKind::mfcc && n_mfcc >= n_mels)
      throw ConfigError("FeatureConfig: n_mfcc must be smaller than n_mels");
    if (!(f_min > 0.0) || !(f_max > f_min) || f_max > clock.sample_rate() / 2)
      throw ConfigError("FeatureConfig: invalid frequency band");
  }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// Hann-windowed real DFT magnitudes of a fixed-size window.
class Stft {
public:
  explicit Stft(std::size_t size) : size_(size), window_(size) {
    if (size < 2 || (size & (size - 1)) != 0)
      throw ConfigError("Stft: size must be a power of two");
    // Periodic Hann.
    for (std::size_t n = 0; n < size; ++n)
      window_[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(size));
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * size));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (size / 2 + 1)));
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(size), in_, out_, FFTW_ESTIMATE);
  }

  Stft(const Stft&) = delete;
  Stft& operator=(const Stft&) = delete;
  Stft(Stft&& o) noexcept
      : size_(o.size_), window_(std::move(o.window_)), in_(o.in_), out_(o.out_), plan_(o.plan_) {
    o.in_ = nullptr;
    o.out_ = nullptr;
    o.plan_ = nullptr;
  }
  Stft& operator=(Stft&&) = delete;

  ~Stft() {
    if (plan_) {
      std::lock_guard lock(detail::fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }

  std::size_t size() const noexcept { return size_; }
  std::size_t bins() const noexcept { return size_ / 2 + 1; }
  /// Sum of the window taps; |X| / window_sum is the amplitude of a
  /// bin-centred cosine.
  double window_sum() const noexcept { return static_cast<double>(size_) / 2.0; }

  void magnitude(std::span<const double> samples, std::vector<double>& mag) {
    if (samples.size() != size_)
      throw InputError("stft_magnitude: window has " + std::to_string(samples.size()) + " samples, expected " +
                       std::to_string(size_));
    for (std::size_t n = 0; n < size_; ++n)
      in_[n] = samples[n] * window_[n];
    fftw_execute(plan_);
    mag.resize(bins());
    for (std::size_t k = 0; k < bins(); ++k)
      mag[k] = std::hypot(out_[k][0], out_[k][1]);
  }

private:
  std::size_t size_;
  std::vector<double> window_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_ = nullptr;
};

inline std::vector<double> stft_magnitude(std::span<const double> samples) {
  Stft stft(samples.size());
  std::vector<double> mag;
  stft.magnitude(samples, mag);
  return mag;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Precomputed bin maps for every feature kind at one FFT size.
class FeatureBank {
public:
  struct MelRow {
    std::size_t first_bin = 0;
    std::vector<double> weights;
  };

  explicit FeatureBank(const FeatureConfig& cfg) : cfg_(cfg), n_(cfg.window_size()) {
    cfg.validate();
    const std::size_t bins = n_ / 2 + 1;
    const double bin_hz = cfg.clock.sample_rate() / static_cast<double>(n_);
    norm_ = 1.0 / std::pow(static_cast<double>(n_) / 2.0, 2);

    pitch_class_.assign(bins, -1);
    lse_band_.assign(bins, -1);
    const double ratio = std::log(cfg.f_max / cfg.f_min) / static_cast<double>(cfg.lse_bins);
    for (std::size_t k = 1; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      if (f < cfg.f_min || f > cfg.f_max)
        continue;
      const long pitch = std::lround(69.0 + 12.0 * std::log2(f / 440.0));
      pitch_class_[k] = static_cast<int>(((pitch % 12) + 12) % 12);
      const auto band = static_cast<std::size_t>(std::log(f / cfg.f_min) / ratio);
      lse_band_[k] = static_cast<int>(std::min(band, cfg.lse_bins - 1));
    }

    build_mel(bins, bin_hz);

    dct_.resize(cfg.n_mfcc * cfg.n_mels);
    const double m = static_cast<double>(cfg.n_mels);
    for (std::size_t c = 0; c < cfg.n_mfcc; ++c)
      for (std::size_t j = 0; j < cfg.n_mels; ++j)
        dct_[c * cfg.n_mels + j] = std::sqrt(2.0 / m) *
                                   std::cos(std::numbers::pi * static_cast<double>(c + 1) *
                                            (static_cast<double>(j) + 0.5) / m);
  }

  const FeatureConfig& config() const noexcept { return cfg_; }
  std::size_t bins() const noexcept { return n_ / 2 + 1; }
  const std::vector<MelRow>& mel_rows() const noexcept { return mel_rows_; }
  /// Pitch class (C = 0) for each linear bin; -1 outside the analysis band.
  const std::vector<int>& pitch_class_map() const noexcept { return pitch_class_; }
  const std::vector<int>& lse_band_map() const noexcept { return lse_band_; }

  /// Normalised power of bin k: a full-scale bin-centred cosine gives 0.25.
  double power(std::span<const double> mag, std::size_t k) const noexcept { return mag[k] * mag[k] * norm_; }

  double in_band_energy(std::span<const double> mag) const {
    check(mag);
    double e = 0.0;
    for (std::size_t k = 0; k < mag.size(); ++k)
      if (pitch_class_[k] >= 0)
        e += power(mag, k);
    return e;
  }

  /// Chroma energy per pitch class before normalisation.
  std::array<double, 12> chroma_energy(std::span<const double> mag) const {
    check(mag);
    std::array<double, 12> out{};
    for (std::size_t k = 0; k < mag.size(); ++k)
      if (pitch_class_[k] >= 0)
        out[static_cast<std::size_t>(pitch_class_[k])] += power(mag, k);
    return out;
  }

  void chroma(std::span<const double> mag, std::span<double> out) const {
    const auto e = chroma_energy(mag);
    double total = 0.0, sq = 0.0;
    for (double v : e) {
      total += v;
      sq += v * v;
    }
    if (total < cfg_.silence_gate) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t i = 0; i < 12; ++i)
      out[i] = e[i] * inv;
  }

  void mel(std::span<const double> mag, std::span<double> out) const {
    check(mag);
    for (std::size_t r = 0; r < mel_rows_.size(); ++r) {
      const auto& row = mel_rows_[r];
      double acc = 0.0;
      for (std::size_t i = 0; i < row.weights.size(); ++i)
        acc += row.weights[i] * power(mag, row.first_bin + i);
      out[r] = acc;
    }
  }

  /// DCT-II (orthonormal) of a log-mel vector, coefficients 1..n_mfcc.
  void mfcc_from_log_mel(std::span<const double> log_mel, std::span<double> out) const {
    if (log_mel.size() != cfg_.n_mels)
      throw InputError("mfcc: log-mel vector has wrong length");
    for (std::size_t c = 0; c < cfg_.n_mfcc; ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < cfg_.n_mels; ++j)
        acc += dct_[c * cfg_.n_mels + j] * log_mel[j];
      out[c] = acc;
    }
  }

  void mfcc(std::span<const double> mag, std::span<double> out) const {
    if (in_band_energy(mag) < cfg_.silence_gate) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    std::vector<double> m(cfg_.n_mels);
    mel(mag, m);
    for (double& v : m)
      v = std::log(v + kLogFloor);
    mfcc_from_log_mel(m, out);
  }

  /// log(1 + g * band power) per log-spaced band.
  void lse_bands(std::span<const double> mag, std::span<double> out) const {
    check(mag);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t k = 0; k < mag.size(); ++k)
      if (lse_band_[k] >= 0)
        out[static_cast<std::size_t>(lse_band_[k])] += power(mag, k);
    for (double& v : out)
      v = std::log1p(cfg_.lse_gain * v);
  }

  static void rectified_difference(std::span<const double> cur, std::span<const double> prev,
                                   std::span<double> out) noexcept {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = std::max(0.0, cur[i] - prev[i]);
  }

  void lse(std::span<const double> mag, std::span<const double> prev_mag, std::span<double> out) const {
    if (prev_mag.size() != mag.size())
      throw InputError("lse: spectra differ in length");
    std::vector<double> cur(cfg_.lse_bins), prev(cfg_.lse_bins);
    lse_bands(mag, cur);
    lse_bands(prev_mag, prev);
    rectified_difference(cur, prev, out);
  }

private:
  static constexpr double kLogFloor = 1e-10;

  void check(std::span<const double> mag) const {
    if (mag.size() != bins())
      throw InputError("feature: spectrum has " + std::to_string(mag.size()) + " bins, expected " +
                       std::to_string(bins()));
  }

  void build_mel(std::size_t bins, double bin_hz) {
    const std::size_t n = cfg_.n_mels;
    const double lo = hz_to_mel(cfg_.f_min), hi = hz_to_mel(cfg_.f_max);
    std::vector<double> edges(n + 2);
    for (std::size_t i = 0; i < n + 2; ++i)
      edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n + 1));
    mel_rows_.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
      const double left = edges[r], centre = edges[r + 1], right = edges[r + 2];
      std::vector<double> w(bins, 0.0);
      for (std::size_t k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * bin_hz;
        if (f > left && f < right)
          w[k] = f <= centre ? (f - left) / (centre - left) : (right - f) / (right - centre);
      }
      double sum = 0.0;
      for (double v : w)
        sum += v;
      if (sum <= 0.0) {
        // Filter narrower than a bin: give it the nearest bin.
        const auto k = static_cast<std::size_t>(std::lround(centre / bin_hz));
        w[std::min(k, bins - 1)] = 1.0;
        sum = 1.0;
      }
      std::size_t first = 0;
      while (w[first] == 0.0)
        ++first;
      std::size_t last = bins - 1;
      while (w[last] == 0.0)
        --last;
      mel_rows_[r].first_bin = first;
      mel_rows_[r].weights.assign(w.begin() + static_cast<std::ptrdiff_t>(first),
                                  w.begin() + static_cast<std::ptrdiff_t>(last + 1));
      for (double& v : mel_rows_[r].weights)
        v /= sum;
    }
  }

  FeatureConfig cfg_;
  std::size_t n_;
  double norm_ = 1.0;
  std::vector<int> pitch_class_;
  std::vector<int> lse_band_;
  std::vector<MelRow> mel_rows_;
  std::vector<double> dct_;
};

/// Re-blocks an arbitrarily chunked sample stream into overlapping analysis
/// windows. Frame k ends at sample (k + 1) * hop; samples before the start of
/// the stream read as zero. Windows never look ahead of the newest sample.
class FrameBlocker {
public:
  FrameBlocker(std::size_t window, std::size_t hop) : window_(window), hop_(hop) {
    if (hop == 0 || window < hop)
      throw ConfigError("FrameBlocker: need window >= hop > 0");
    reset();
  }

  void reset() {
    buf_.assign(window_ - hop_, 0.0);
    buf_.reserve(window_);
    pending_ = 0;
  }

  std::size_t window() const noexcept { return window_; }
  std::size_t hop() const noexcept { return hop_; }
  /// Samples received since the last emitted frame.
  std::size_t buffered() const noexcept { return pending_; }

  template <class OnFrame>
  void push(std::span<const double> chunk, OnFrame&& on_frame) {
    while (!chunk.empty()) {
      const std::size_t take = std::min(hop_ - pending_, chunk.size());
      buf_.insert(buf_.end(), chunk.begin(), chunk.begin() + static_cast<std::ptrdiff_t>(take));
      chunk = chunk.subspan(take);
      pending_ += take;
      if (pending_ == hop_) {
        on_frame(std::span<const double>(buf_.data(), window_));
        buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(hop_));
        pending_ = 0;
      }
    }
  }

  /// Convenience form collecting windows into owned vectors.
  std::vector<std::vector<double>> push(std::span<const double> chunk) {
    std::vector<std::vector<double>> frames;
    push(chunk, [&](std::span<const double> w) { frames.emplace_back(w.begin(), w.end()); });
    return frames;
  }

private:
  std::size_t window_;
  std::size_t hop_;
  std::vector<double> buf_;
  std::size_t pending_ = 0;
};

/// Stateful feature extractor: samples in, one feature vector per hop out.
class Processor {
public:
  explicit Processor(const FeatureConfig& cfg)
      : bank_(cfg),
        stft_(cfg.window_size()),
        blocker_(cfg.window_size(), cfg.clock.hop()),
        prev_bands_(cfg.lse_bins, 0.0),
        cur_bands_(cfg.lse_bins, 0.0),
        out_(cfg.dim(), 0.0) {}

  const FeatureConfig& config() const noexcept { return bank_.config(); }
  const FeatureBank& bank() const noexcept { return bank_; }
  std::size_t dim() const noexcept { return out_.size(); }

  void reset() {
    blocker_.reset();
    std::fill(prev_bands_.begin(), prev_bands_.end(), 0.0);
  }

  /// Features of one analysis window, advancing the LSE history.
  std::span<const double> process_window(std::span<const double> window) {
    stft_.magnitude(window, mag_);
    switch (bank_.config().kind) {
      case FeatureKind::chroma: bank_.chroma(mag_, out_); break;
      case FeatureKind::mel: bank_.mel(mag_, out_); break;
      case FeatureKind::mfcc: bank_.mfcc(mag_, out_); break;
      case FeatureKind::lse:
        bank_.lse_bands(mag_, cur_bands_);
        FeatureBank::rectified_difference(cur_bands_, prev_bands_, out_);
        std::swap(cur_bands_, prev_bands_);
        break;
    }
    return out_;
  }

  /// Feed a chunk; `on_frame` receives each completed feature vector.
  template <class OnFrame>
  void push(std::span<const double> chunk, OnFrame&& on_frame) {
    blocker_.push(chunk, [&](std::span<const double> w) { on_frame(process_window(w)); });
  }

  void push(std::span<const double> chunk, FeatureMatrix& into) {
    push(chunk, [&](std::span<const double> f) { into.push_back(f); });
  }

private:
  FeatureBank bank_;
  Stft stft_;
  FrameBlocker blocker_;
  std::vector<double> mag_;
  std::vector<double> prev_bands_;
  std::vector<double> cur_bands_;
  std::vector<double> out_;
};

/// Offline extraction over a whole buffer.
inline FeatureMatrix extract_features(const AudioBuffer& audio, const FeatureConfig& cfg) {
  if (audio.sample_rate != cfg.clock.sample_rate())
    throw ConfigError("extract_features: audio is " + std::to_string(audio.sample_rate) + " Hz, clock expects " +
                      std::to_string(cfg.clock.sample_rate()) + " Hz");
  Processor proc(cfg);
  FeatureMatrix m(cfg.dim(), cfg.clock);
  m.reserve(audio.samples.size() / cfg.clock.hop());
  proc.push(audio.samples, m);
  return m;
}

}  // namespace scorefollow
