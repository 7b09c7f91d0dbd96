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
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/manifest.hpp"
#include "dsv/rng.hpp"
#include "dsv/wav_io.hpp"

namespace dsv {

// Parameterized identity transforms standing in for voice-conversion and
// anonymization systems: each kind leaves linguistic content (the synthetic
// vowel stream) intact while distorting speaker cues in its own way.
enum class TransformKind { kPitchShift, kSpectralWarp, kVocoderNoise, kFormantScale };

inline std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::kPitchShift: return "pitch_shift";
    case TransformKind::kSpectralWarp: return "spectral_warp";
    case TransformKind::kVocoderNoise: return "vocoder_noise";
    case TransformKind::kFormantScale: return "formant_scale";
  }
  return "?";
}

inline TransformKind transform_kind_from_string(const std::string& s) {
  if (s == "pitch_shift") return TransformKind::kPitchShift;
  if (s == "spectral_warp") return TransformKind::kSpectralWarp;
  if (s == "vocoder_noise") return TransformKind::kVocoderNoise;
  if (s == "formant_scale") return TransformKind::kFormantScale;
  throw InvalidConfigError("unknown transform kind: " + s);
}

struct TransformSpec {
  std::string transform_id;
  TransformKind kind = TransformKind::kPitchShift;
  double strength = 1.0;
  uint64_t seed = 0;
};

namespace detail {

// WOLA short-time processing: Hann analysis window, hop = win/4, synthesis by
// overlap-add with squared-window normalization. The frame processor edits
// the half spectrum in place.
template <typename FrameFn>
Waveform stft_process(const Waveform& in, FrameFn&& process, int win = 512) {
  const int hop = win / 4;
  const auto n = static_cast<Eigen::Index>(in.samples.size());
  const int bins = win / 2 + 1;

  std::vector<double> window(static_cast<size_t>(win));
  for (int i = 0; i < win; ++i)
    window[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / win);

  std::vector<double> out(static_cast<size_t>(n), 0.0);
  std::vector<double> norm(static_cast<size_t>(n), 0.0);
  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<size_t>(win));
  std::vector<std::complex<double>> spec;
  std::vector<std::complex<double>> half(static_cast<size_t>(bins));

  for (Eigen::Index start = 0; start < n; start += hop) {
    for (int i = 0; i < win; ++i) {
      const Eigen::Index idx = start + i;
      frame[static_cast<size_t>(i)] =
          idx < n ? in.samples[static_cast<size_t>(idx)] * window[static_cast<size_t>(i)]
                  : 0.0;
    }
    fft.fwd(spec, frame);
    for (int k = 0; k < bins; ++k) half[static_cast<size_t>(k)] = spec[static_cast<size_t>(k)];
    process(half);
    // rebuild the full spectrum with conjugate symmetry
    for (int k = 0; k < bins; ++k) spec[static_cast<size_t>(k)] = half[static_cast<size_t>(k)];
    for (int k = bins; k < win; ++k)
      spec[static_cast<size_t>(k)] = std::conj(half[static_cast<size_t>(win - k)]);
    std::vector<double> rec;
    fft.inv(rec, spec);
    for (int i = 0; i < win; ++i) {
      const Eigen::Index idx = start + i;
      if (idx >= n) break;
      out[static_cast<size_t>(idx)] += rec[static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
      norm[static_cast<size_t>(idx)] += window[static_cast<size_t>(i)] * window[static_cast<size_t>(i)];
    }
  }
  Waveform result;
  result.sample_rate = in.sample_rate;
  result.samples.resize(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i)
    result.samples[static_cast<size_t>(i)] =
        out[static_cast<size_t>(i)] / std::max(norm[static_cast<size_t>(i)], 1e-3);
  return result;
}

inline std::complex<double> complex_lerp(const std::vector<std::complex<double>>& h,
                                         double pos) {
  if (pos < 0.0 || pos > static_cast<double>(h.size() - 1)) return {0.0, 0.0};
  const auto lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, h.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return h[lo] * (1.0 - frac) + h[hi] * frac;
}

inline double clamped_lerp(const std::vector<double>& v, double pos) {
  pos = std::clamp(pos, 0.0, static_cast<double>(v.size() - 1));
  const auto lo = static_cast<size_t>(pos);
  const size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] * (1.0 - frac) + v[hi] * frac;
}

// log-magnitude envelope by two box-smoothing passes
inline std::vector<double> spectral_envelope(const std::vector<std::complex<double>>& h,
                                             int radius = 8) {
  std::vector<double> logmag(h.size());
  for (size_t k = 0; k < h.size(); ++k) logmag[k] = std::log(std::abs(h[k]) + 1e-12);
  std::vector<double> tmp(h.size());
  for (int pass = 0; pass < 2; ++pass) {
    for (size_t k = 0; k < h.size(); ++k) {
      double acc = 0.0;
      int cnt = 0;
      for (int d = -radius; d <= radius; ++d) {
        const auto j = static_cast<long>(k) + d;
        if (j < 0 || j >= static_cast<long>(h.size())) continue;
        acc += logmag[static_cast<size_t>(j)];
        ++cnt;
      }
      tmp[k] = acc / cnt;
    }
    logmag.swap(tmp);
  }
  return logmag;
}

}  // namespace detail

// Duration- and rate-preserving identity transform. pitch_shift multiplies
// the fundamental by its strength; the other kinds warp or perturb the
// spectrum with artifact patterns characteristic of their kind.
inline Waveform apply_transform(const Waveform& in, const TransformSpec& spec) {
  if (in.samples.empty()) throw InvalidInputError("apply_transform: empty waveform");
  switch (spec.kind) {
    case TransformKind::kPitchShift: {
      if (spec.strength < 0.5 || spec.strength > 2.0)
        throw InvalidConfigError("pitch_shift strength outside [0.5, 2]");
      const auto n = in.samples.size();
      Waveform out;
      out.sample_rate = in.sample_rate;
      out.samples.resize(n);
      // resample read position, reflected at the ends to stay continuous
      const double period = 2.0 * static_cast<double>(n - 1);
      for (size_t i = 0; i < n; ++i) {
        double pos = std::fmod(static_cast<double>(i) * spec.strength, period);
        if (pos > static_cast<double>(n - 1)) pos = period - pos;
        const auto lo = static_cast<size_t>(pos);
        const size_t hi = std::min(lo + 1, n - 1);
        const double frac = pos - static_cast<double>(lo);
        out.samples[i] = in.samples[lo] * (1.0 - frac) + in.samples[hi] * frac;
      }
      return out;
    }
    case TransformKind::kSpectralWarp: {
      if (spec.strength < 0.7 || spec.strength > 1.4)
        throw InvalidConfigError("spectral_warp strength outside [0.7, 1.4]");
      // phase-vocoder frequency scaling: magnitudes are remapped along the
      // frequency axis and output phases advance at the warped instantaneous
      // frequency, which is what actually moves spectral content
      const int win = 512;
      const int hop = win / 4;
      const double alpha = spec.strength;
      struct VocoderState {
        std::vector<double> prev_in_phase, out_phase;
        bool first = true;
      };
      auto state = std::make_shared<VocoderState>();
      return detail::stft_process(
          in,
          [state, alpha, win, hop](std::vector<std::complex<double>>& h) {
            const size_t bins = h.size();
            if (state->first) {
              state->prev_in_phase.assign(bins, 0.0);
              state->out_phase.assign(bins, 0.0);
            }
            std::vector<double> in_mag(bins), in_phase(bins);
            for (size_t b = 0; b < bins; ++b) {
              in_mag[b] = std::abs(h[b]);
              in_phase[b] = std::arg(h[b]);
            }
            for (size_t k = 0; k < bins; ++k) {
              const double p = static_cast<double>(k) / alpha;
              if (p > static_cast<double>(bins - 1)) {
                h[k] = {0.0, 0.0};
                continue;
              }
              const auto b = static_cast<size_t>(std::lround(p));
              const double mag = detail::clamped_lerp(in_mag, p);
              const double omega_b = 2.0 * M_PI * static_cast<double>(b) / win;
              if (state->first) {
                state->out_phase[k] = in_phase[b];
              } else {
                double dphi = in_phase[b] - state->prev_in_phase[b] - omega_b * hop;
                dphi -= 2.0 * M_PI * std::round(dphi / (2.0 * M_PI));
                const double omega_true = omega_b + dphi / hop;
                state->out_phase[k] += alpha * omega_true * hop;
              }
              h[k] = std::polar(mag, state->out_phase[k]);
            }
            state->prev_in_phase = in_phase;
            state->first = false;
          },
          win);
    }
    case TransformKind::kFormantScale: {
      if (spec.strength < 0.7 || spec.strength > 1.4)
        throw InvalidConfigError("formant_scale strength outside [0.7, 1.4]");
      return detail::stft_process(in, [&](std::vector<std::complex<double>>& h) {
        const std::vector<double> env = detail::spectral_envelope(h);
        for (size_t k = 0; k < h.size(); ++k) {
          const double warped =
              detail::clamped_lerp(env, static_cast<double>(k) / spec.strength);
          h[k] *= std::exp(warped - env[k]);
        }
      });
    }
    case TransformKind::kVocoderNoise: {
      if (spec.strength < 0.0 || spec.strength > 0.25)
        throw InvalidConfigError("vocoder_noise strength outside [0, 0.25]");
      auto rng = make_rng(mix_seed(spec.seed, 0x401e));
      std::normal_distribution<double> dist(0.0, 1.0);
      const auto n = in.samples.size();
      const size_t block = static_cast<size_t>(in.sample_rate / 100);  // 10 ms
      Waveform out = in;
      double lp = 0.0;
      double rms = 0.0;
      for (size_t i = 0; i < n; ++i) {
        if (i % block == 0) {
          double acc = 0.0;
          const size_t end = std::min(n, i + block);
          for (size_t j = i; j < end; ++j) acc += in.samples[j] * in.samples[j];
          rms = std::sqrt(acc / static_cast<double>(end - i));
        }
        lp = 0.7 * lp + 0.3 * dist(rng);  // band-limited vocoder-style hiss
        out.samples[i] = in.samples[i] + spec.strength * rms * lp * 3.0;
      }
      return out;
    }
  }
  throw InvalidConfigError("unhandled transform kind");
}

// Eight-system training bank: two strengths of each kind, seeds derived from
// the bank seed. A ninth configuration is reserved as the held-out
// "anonymizer" and never appears in the bank.
inline std::vector<TransformSpec> default_transform_bank(uint64_t seed = 0) {
  std::vector<TransformSpec> bank = {
      {"ps088", TransformKind::kPitchShift, 0.88, 0},
      {"ps114", TransformKind::kPitchShift, 1.14, 0},
      {"sw092", TransformKind::kSpectralWarp, 0.92, 0},
      {"sw109", TransformKind::kSpectralWarp, 1.09, 0},
      {"fs086", TransformKind::kFormantScale, 0.86, 0},
      {"fs116", TransformKind::kFormantScale, 1.16, 0},
      {"vn006", TransformKind::kVocoderNoise, 0.06, 0},
      {"vn012", TransformKind::kVocoderNoise, 0.12, 0},
  };
  for (size_t i = 0; i < bank.size(); ++i)
    bank[i].seed = mix_seed(seed, 0xba7c + static_cast<uint64_t>(i));
  return bank;
}

inline TransformSpec default_heldout_transform(uint64_t seed = 0) {
  return {"ps078", TransformKind::kPitchShift, 0.78, mix_seed(seed, 0x8e1d)};
}

// Applies each spec to each utterance; writes wavs/<utt>__<tid>.wav beside a
// combined manifest carrying the transform_id column. Per-utterance seeds mix
// the spec seed with the utterance id so repeated ids stay deterministic.
inline Manifest transform_corpus(const Manifest& src, const std::vector<TransformSpec>& specs,
                                 const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wavs");
  Manifest out;
  out.base_dir = out_dir;
  for (const auto& spec : specs) {
    for (const auto& e : src.entries) {
      const Waveform wav = read_wav(src.resolve_path(e));
      TransformSpec per_utt = spec;
      per_utt.seed = mix_seed(spec.seed, fnv1a(e.utt_id.data(), e.utt_id.size()));
      const Waveform transformed = apply_transform(wav, per_utt);
      const std::string utt_id = e.utt_id + "__" + spec.transform_id;
      const std::string rel = "wavs/" + utt_id + ".wav";
      write_wav((fs::path(out_dir) / rel).string(), transformed);
      out.entries.push_back({utt_id, e.speaker_id, e.gender, rel, spec.transform_id});
    }
  }
  out.write((fs::path(out_dir) / "manifest.txt").string());
  return out;
}

}  // namespace dsv
