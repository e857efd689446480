#pragma once

// Frame planning and per-frame feature extraction. A window of samples is cut
// into C frames of psi samples; each frame yields
//   [power spectrum (psi/2+1 bins), rms, moving average, kurtosis, crest factor]
// and the frames are stacked into a (C, psi/2+5) feature matrix.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "bedocc/common.hpp"
#include "bedocc/signal.hpp"

namespace bedocc {

struct FramePlan {
  std::size_t psi = 32;         // samples per frame
  std::size_t c = 20;           // number of frames
  std::size_t skip = 25;        // samples between frame starts
  std::size_t window_len = 500; // samples in the analysed window

  std::size_t feature_dim() const { return psi / 2 + 5; }
};

inline std::size_t feature_dim(std::size_t psi) { return psi / 2 + 5; }

inline FramePlan plan_frames(std::size_t window_len, std::size_t psi, std::size_t c) {
  require(psi >= 2 && psi % 2 == 0, "plan_frames: frame length must be even and >= 2");
  require(c >= 1, "plan_frames: need at least one frame");
  require(window_len >= psi, "plan_frames: window shorter than one frame");
  return FramePlan{psi, c, (window_len + c - 1) / c, window_len};
}

struct Provenance {
  std::string patient_id;
  double start_s = 0.0;
  double end_s = 0.0;
};

/// Row-major (frames x features) matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  Provenance provenance;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
};

// Column layout helpers for a feature vector of frame length psi.
struct FeatureLayout {
  std::size_t psi;
  std::size_t bins() const { return psi / 2 + 1; }
  std::size_t rms() const { return bins(); }
  std::size_t ma() const { return bins() + 1; }
  std::size_t kurtosis() const { return bins() + 2; }
  std::size_t crest() const { return bins() + 3; }
  std::size_t dim() const { return bins() + 4; }
};

inline std::vector<std::string> feature_names(std::size_t psi) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k <= psi / 2; ++k) names.push_back("psd" + std::to_string(k));
  names.insert(names.end(), {"rms", "ma", "kurtosis", "crest"});
  return names;
}

namespace detail {

inline bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

// In-place iterative radix-2 FFT.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  thread_local std::array<std::vector<std::complex<double>>, 64> tables;
  auto& twiddle = tables[static_cast<std::size_t>(std::countr_zero(n))];
  if (twiddle.size() != n / 2) {
    twiddle.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      twiddle[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> w = twiddle[k * stride];
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

}  // namespace detail

/// Squared magnitudes of one-sided DFT bins 0..psi/2 (rectangular window).
inline std::vector<double> power_spectrum(std::span<const double> frame) {
  const std::size_t n = frame.size();
  require(n >= 2 && n % 2 == 0, "power_spectrum: frame length must be even");
  std::vector<double> out(n / 2 + 1);
  if (detail::is_pow2(n)) {
    std::vector<std::complex<double>> a(frame.begin(), frame.end());
    detail::fft_inplace(a);
    for (std::size_t k = 0; k <= n / 2; ++k) out[k] = std::norm(a[k]);
    return out;
  }
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += frame[t] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) / static_cast<double>(n));
    }
    out[k] = std::norm(acc);
  }
  return out;
}

inline double rms(std::span<const double> frame) {
  require(!frame.empty(), "rms: empty frame");
  double s = 0.0;
  for (double v : frame) s += v * v;
  return std::sqrt(s / static_cast<double>(frame.size()));
}

/// Per-frame moving average, i.e. the frame mean.
inline double moving_average(std::span<const double> frame) {
  require(!frame.empty(), "moving_average: empty frame");
  double s = 0.0;
  for (double v : frame) s += v;
  return s / static_cast<double>(frame.size());
}

/// Pearson (non-excess) kurtosis m4/m2^2 from population moments; 0 for zero variance.
inline double kurtosis(std::span<const double> frame) {
  const double mean = moving_average(frame);
  double m2 = 0.0, m4 = 0.0;
  for (double v : frame) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  const auto n = static_cast<double>(frame.size());
  m2 /= n;
  m4 /= n;
  if (m2 <= 1e-300) return 0.0;
  return m4 / (m2 * m2);
}

/// Peak |x| over RMS; 0 for an all-zero frame.
inline double crest_factor(std::span<const double> frame) {
  const double r = rms(frame);
  if (r <= 0.0) return 0.0;
  double peak = 0.0;
  for (double v : frame) peak = std::max(peak, std::abs(v));
  return peak / r;
}

inline std::vector<double> feature_vector(std::span<const double> frame, std::size_t psi) {
  require(frame.size() == psi, "feature_vector: frame length " + std::to_string(frame.size()) +
                                   " does not match psi " + std::to_string(psi));
  std::vector<double> out = power_spectrum(frame);
  out.reserve(psi / 2 + 5);
  out.push_back(rms(frame));
  out.push_back(moving_average(frame));
  out.push_back(kurtosis(frame));
  out.push_back(crest_factor(frame));
  return out;
}

/// C rows; row i is the feature vector of the frame starting at i*skip (zero-padded on overrun).
inline FeatureMatrix window_feature_matrix(std::span<const double> window, const FramePlan& plan) {
  require(window.size() == plan.window_len, "window_feature_matrix: window length mismatch");
  FeatureMatrix m(plan.c, plan.feature_dim());
  std::vector<double> frame(plan.psi);
  for (std::size_t i = 0; i < plan.c; ++i) {
    const std::size_t start = i * plan.skip;
    for (std::size_t j = 0; j < plan.psi; ++j) {
      const std::size_t idx = start + j;
      frame[j] = idx < window.size() ? window[idx] : 0.0;
    }
    const auto fv = feature_vector(frame, plan.psi);
    std::copy(fv.begin(), fv.end(), m.row(i).begin());
  }
  return m;
}

enum class IntervalAveraging { Linear, LogPower };

inline constexpr std::size_t kIntervalFrameSamples = 1000;  // 10 s at 100 Hz
inline constexpr std::size_t kMinRemainderSamples = 200;    // 2 s

/// Start indices of the 10 s frames covering [begin, end); the last may overrun (zero padding).
inline std::vector<std::size_t> interval_frame_starts(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> starts;
  if (end <= begin) {
    starts.push_back(begin);
    return starts;
  }
  const std::size_t len = end - begin;
  const std::size_t full = len / kIntervalFrameSamples;
  const std::size_t rem = len % kIntervalFrameSamples;
  for (std::size_t i = 0; i < full; ++i) starts.push_back(begin + i * kIntervalFrameSamples);
  if (full == 0 || rem >= kMinRemainderSamples) starts.push_back(begin + full * kIntervalFrameSamples);
  return starts;
}

/// Element-wise mean of the window feature matrices of consecutive 10 s frames of an interval.
inline FeatureMatrix interval_feature_matrix(const MagnitudeSignal& signal, Segment interval, std::size_t psi,
                                             std::size_t c,
                                             IntervalAveraging averaging = IntervalAveraging::Linear) {
  require(interval.end_s > interval.start_s, "interval_feature_matrix: empty interval");
  const FramePlan plan = plan_frames(kIntervalFrameSamples, psi, c);
  const std::size_t n = signal.size();
  const std::size_t begin = std::min(sample_at_or_after(interval.start_s, signal.fs), n);
  const std::size_t end = std::min(sample_at_or_after(interval.end_s, signal.fs), n);
  const auto starts = interval_frame_starts(begin, std::max(begin, end));
  const std::size_t bins = psi / 2 + 1;
  constexpr double kLogFloor = 1e-12;

  FeatureMatrix acc(plan.c, plan.feature_dim());
  std::vector<double> frame(kIntervalFrameSamples);
  for (std::size_t s : starts) {
    const std::size_t stop = std::min(s + kIntervalFrameSamples, end);
    std::fill(frame.begin(), frame.end(), 0.0);
    for (std::size_t i = s; i < stop; ++i) frame[i - s] = signal.samples[i];
    const FeatureMatrix m = window_feature_matrix(frame, plan);
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t col = 0; col < m.cols; ++col) {
        double v = m(r, col);
        if (averaging == IntervalAveraging::LogPower && col < bins) v = std::log(v + kLogFloor);
        acc(r, col) += v;
      }
    }
  }
  const auto count = static_cast<double>(starts.size());
  for (std::size_t r = 0; r < acc.rows; ++r) {
    for (std::size_t col = 0; col < acc.cols; ++col) {
      double& v = acc(r, col);
      v /= count;
      if (averaging == IntervalAveraging::LogPower && col < bins) v = std::max(0.0, std::exp(v) - kLogFloor);
    }
  }
  acc.provenance = {signal.patient_id, interval.start_s, interval.end_s};
  return acc;
}

}  // namespace bedocc
