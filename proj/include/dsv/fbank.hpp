// Copyright (c) 2026 DSV Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/wav_io.hpp"

namespace dsv {

struct FbankConfig {
  int n_mels = 80;
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int fft_size = 0;  // 0: smallest power of two >= window length
  double log_floor = 1e-10;
  double preemphasis = 0.97;
  double low_freq_hz = 20.0;
  double high_freq_hz = 0.0;  // 0: Nyquist
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace detail {

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace detail

// Triangular mel filters, triangles formed on the mel axis over FFT bins
// [0, fft_size/2].
inline Matrix mel_filterbank(const FbankConfig& cfg, int sample_rate, int fft_size) {
  const double high = cfg.high_freq_hz > 0.0 ? cfg.high_freq_hz : sample_rate / 2.0;
  if (cfg.low_freq_hz < 0.0 || high <= cfg.low_freq_hz || high > sample_rate / 2.0 + 1e-9)
    throw InvalidConfigError("fbank: bad low/high frequency range");
  const int n_bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.low_freq_hz);
  const double mel_hi = hz_to_mel(high);
  std::vector<double> centers(static_cast<size_t>(cfg.n_mels) + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    centers[static_cast<size_t>(i)] = mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1);

  Matrix bank = Matrix::Zero(cfg.n_mels, n_bins);
  for (int k = 0; k < n_bins; ++k) {
    const double mel = hz_to_mel(static_cast<double>(k) * sample_rate / fft_size);
    for (int m = 0; m < cfg.n_mels; ++m) {
      const double left = centers[static_cast<size_t>(m)];
      const double center = centers[static_cast<size_t>(m) + 1];
      const double right = centers[static_cast<size_t>(m) + 2];
      if (mel > left && mel < right) {
        bank(m, k) = mel <= center ? (mel - left) / (center - left)
                                   : (right - mel) / (right - center);
      }
    }
  }
  return bank;
}

// Central frequency (Hz) of mel bin m under the same layout as
// mel_filterbank; handy for probe-tone checks.
inline double mel_bin_center_hz(const FbankConfig& cfg, int sample_rate, int m) {
  const double high = cfg.high_freq_hz > 0.0 ? cfg.high_freq_hz : sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.low_freq_hz);
  const double mel_hi = hz_to_mel(high);
  return mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.n_mels + 1));
}

// Log mel-filterbank energies, one row per frame. Frames are snipped at the
// signal edge (no padding), so appending less than one hop of audio never
// changes existing frames.
inline FeatureMatrix compute_fbank(const Waveform& wav, const FbankConfig& cfg) {
  if (cfg.n_mels < 1) throw InvalidConfigError("fbank: n_mels must be >= 1");
  if (cfg.hop_ms > cfg.window_ms || cfg.hop_ms <= 0.0)
    throw InvalidConfigError("fbank: need 0 < hop_ms <= window_ms");
  if (cfg.log_floor <= 0.0) throw InvalidConfigError("fbank: log_floor must be > 0");
  if (wav.sample_rate <= 0) throw InvalidInputError("fbank: sample_rate must be > 0");

  const int win = static_cast<int>(std::lround(cfg.window_ms * wav.sample_rate / 1000.0));
  const int hop = static_cast<int>(std::lround(cfg.hop_ms * wav.sample_rate / 1000.0));
  if (win < 2 || hop < 1) throw InvalidConfigError("fbank: degenerate window/hop");
  const auto n = static_cast<Eigen::Index>(wav.samples.size());
  if (n < win) throw InvalidInputError("fbank: waveform shorter than one window");
  const int fft_size = cfg.fft_size > 0 ? cfg.fft_size : detail::next_pow2(win);
  if (fft_size < win) throw InvalidConfigError("fbank: fft_size smaller than window");

  // Pre-emphasis over the whole signal; first sample follows the x[0]-p*x[0]
  // convention so silence stays exactly zero.
  std::vector<double> emph(wav.samples.size());
  if (!wav.samples.empty()) {
    emph[0] = wav.samples[0] - cfg.preemphasis * wav.samples[0];
    for (size_t i = 1; i < wav.samples.size(); ++i)
      emph[i] = wav.samples[i] - cfg.preemphasis * wav.samples[i - 1];
  }

  std::vector<double> window(static_cast<size_t>(win));
  for (int i = 0; i < win; ++i)
    window[static_cast<size_t>(i)] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win - 1));

  const Eigen::Index n_frames = 1 + (n - win) / hop;
  const Matrix bank = mel_filterbank(cfg, wav.sample_rate, fft_size);
  const int n_bins = fft_size / 2 + 1;

  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<size_t>(fft_size), 0.0);
  std::vector<std::complex<double>> spec;
  Vector power(n_bins);

  FeatureMatrix out;
  out.values.resize(n_frames, cfg.n_mels);
  out.frame_rate = 1000.0 / cfg.hop_ms;
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    const auto start = static_cast<size_t>(t * hop);
    for (int i = 0; i < win; ++i)
      frame[static_cast<size_t>(i)] = emph[start + static_cast<size_t>(i)] *
                                      window[static_cast<size_t>(i)];
    std::fill(frame.begin() + win, frame.end(), 0.0);
    fft.fwd(spec, frame);
    for (int k = 0; k < n_bins; ++k) power(k) = std::norm(spec[static_cast<size_t>(k)]);
    Vector mel = bank * power;
    for (int m = 0; m < cfg.n_mels; ++m)
      out.values(t, m) = std::log(std::max(mel(m), cfg.log_floor));
  }
  return out;
}

}  // namespace dsv
