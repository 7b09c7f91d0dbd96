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

#include <array>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/manifest.hpp"
#include "dsv/rng.hpp"
#include "dsv/wav_io.hpp"

namespace dsv {

// Synthetic speaker identity: pitch level, vocal-tract scaling, per-formant
// offsets, a harmonic-amplitude ripple signature (pitch-invariant timbre) and
// a characteristic prosody modulation rate. Utterances vary in vowel
// sequence, duration and contour while keeping these traits fixed.
struct SynthSpeakerSpec {
  std::string speaker_id;
  std::string gender;
  double fundamental_freq = 120.0;
  double vocal_tract_scale = 1.0;
  Vector formant_offsets;  // Hz, one per formant
  uint64_t timbre_seed = 0;
  double mod_rate_hz = 3.0;
  double tilt_harmonics = 12.0;
};

struct SynthConfig {
  int sample_rate = 16000;
  double utt_min_s = 1.3;
  double utt_max_s = 1.9;
  double noise_level = 0.012;
  double max_harmonic_hz = 7000.0;
};

namespace detail {

// canonical vowel formant targets (Hz)
inline const std::vector<std::array<double, 3>>& vowel_table() {
  static const std::vector<std::array<double, 3>> table = {
      {730.0, 1090.0, 2440.0},  // a
      {530.0, 1840.0, 2480.0},  // e
      {270.0, 2290.0, 3010.0},  // i
      {570.0, 840.0, 2410.0},   // o
      {300.0, 870.0, 2240.0},   // u
  };
  return table;
}

inline double resonance_gain(double f, double center, double bw) {
  const double d = (f - center) / bw;
  return 1.0 / (1.0 + d * d);
}

}  // namespace detail

inline SynthSpeakerSpec make_speaker_spec(int index, int n_speakers, uint64_t seed) {
  if (index < 0 || index >= n_speakers) throw InvalidInputError("speaker index out of range");
  SynthSpeakerSpec spec;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03d", index);
  spec.speaker_id = buf;
  const bool female = index % 2 == 0;
  spec.gender = female ? "female" : "male";

  auto rng = make_rng(mix_seed(seed, 0x9000 + static_cast<uint64_t>(index)));
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const int gender_index = index / 2;
  const int gender_count = (n_speakers + (female ? 1 : 0)) / 2;
  const double lo = female ? 175.0 : 95.0;
  const double hi = female ? 245.0 : 150.0;
  spec.fundamental_freq =
      lo + (hi - lo) * (gender_index + 0.25 + 0.5 * u01(rng)) / std::max(1, gender_count);

  spec.vocal_tract_scale = female ? 1.02 + 0.12 * u01(rng) : 0.88 + 0.12 * u01(rng);
  spec.formant_offsets = Vector(3);
  for (int i = 0; i < 3; ++i) spec.formant_offsets(i) = -60.0 + 120.0 * u01(rng);
  spec.timbre_seed = rng();
  spec.mod_rate_hz = 1.8 + 2.4 * u01(rng);
  spec.tilt_harmonics = 8.0 + 10.0 * u01(rng);
  return spec;
}

// Harmonic source + formant resonances, phase-continuous, fully seeded.
inline Waveform synth_utterance(const SynthSpeakerSpec& spec, uint64_t utt_seed,
                                const SynthConfig& cfg = {}) {
  auto rng = make_rng(mix_seed(utt_seed, 0x07fe));
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int sr = cfg.sample_rate;
  const double dur = cfg.utt_min_s + (cfg.utt_max_s - cfg.utt_min_s) * u01(rng);
  const auto n = static_cast<size_t>(dur * sr);

  // vowel segment plan with 40 ms formant transitions
  struct Segment {
    double t_end;
    std::array<double, 3> formants;
  };
  std::vector<Segment> segments;
  const auto& vowels = detail::vowel_table();
  double t = 0.0;
  while (t < dur) {
    const auto& v = vowels[static_cast<size_t>(u01(rng) * 4.999)];
    Segment s;
    s.t_end = t + 0.15 + 0.17 * u01(rng);
    for (int i = 0; i < 3; ++i)
      s.formants[static_cast<size_t>(i)] =
          std::max(120.0, v[static_cast<size_t>(i)] * spec.vocal_tract_scale +
                              spec.formant_offsets(i));
    segments.push_back(s);
    t = s.t_end;
  }

  const double phase1 = 2.0 * M_PI * u01(rng);
  const double phase2 = 2.0 * M_PI * u01(rng);
  const double drift_rate = 0.43 * spec.mod_rate_hz;

  // pitch-invariant per-harmonic timbre signature
  auto timbre_rng = make_rng(mix_seed(spec.timbre_seed, 0x717b));
  std::uniform_real_distribution<double> urip(-1.0, 1.0);
  std::array<double, 64> ripple{};
  for (auto& r : ripple) r = 1.0 + 0.35 * urip(timbre_rng);

  const double f0_floor = spec.fundamental_freq * 0.9;
  const int n_harm =
      std::min<int>(63, static_cast<int>(cfg.max_harmonic_hz / std::max(50.0, f0_floor)));

  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> phases(static_cast<size_t>(n_harm) + 1, 0.0);
  std::vector<double> amp(static_cast<size_t>(n_harm) + 1, 0.0);
  std::vector<double> amp_step(static_cast<size_t>(n_harm) + 1, 0.0);

  Waveform wav;
  wav.sample_rate = sr;
  wav.samples.resize(n);

  size_t seg_idx = 0;
  const int block = 16;
  std::array<double, 3> cur_formants = segments.front().formants;
  for (size_t i = 0; i < n; ++i) {
    const double tt = static_cast<double>(i) / sr;
    while (seg_idx + 1 < segments.size() && tt > segments[seg_idx].t_end) ++seg_idx;

    // 40 ms linear formant transition into the next segment
    if (seg_idx + 1 < segments.size()) {
      const double until = segments[seg_idx].t_end - tt;
      if (until < 0.04) {
        const double mix = 1.0 - until / 0.04;
        for (int f = 0; f < 3; ++f)
          cur_formants[static_cast<size_t>(f)] =
              (1.0 - mix) * segments[seg_idx].formants[static_cast<size_t>(f)] +
              mix * segments[seg_idx + 1].formants[static_cast<size_t>(f)];
      } else {
        cur_formants = segments[seg_idx].formants;
      }
    }

    const double f0 =
        spec.fundamental_freq *
        (1.0 + 0.05 * std::sin(2.0 * M_PI * spec.mod_rate_hz * tt + phase1) +
         0.03 * std::sin(2.0 * M_PI * drift_rate * tt + phase2));

    if (i % block == 0) {
      // refresh amplitude targets; ramp linearly across the block
      for (int k = 1; k <= n_harm; ++k) {
        const double fk = k * f0;
        double env = 0.0;
        for (int f = 0; f < 3; ++f) {
          const double c = cur_formants[static_cast<size_t>(f)];
          env += detail::resonance_gain(fk, c, 55.0 + 0.07 * c);
        }
        const double target = fk < cfg.max_harmonic_hz
                                  ? ripple[static_cast<size_t>(k)] * env *
                                        std::exp(-static_cast<double>(k) / spec.tilt_harmonics)
                                  : 0.0;
        amp_step[static_cast<size_t>(k)] = (target - amp[static_cast<size_t>(k)]) / block;
      }
    }

    double acc = 0.0;
    const double w = 2.0 * M_PI * f0 / sr;
    for (int k = 1; k <= n_harm; ++k) {
      amp[static_cast<size_t>(k)] += amp_step[static_cast<size_t>(k)];
      phases[static_cast<size_t>(k)] += w * k;
      acc += amp[static_cast<size_t>(k)] * std::sin(phases[static_cast<size_t>(k)]);
    }
    wav.samples[i] = acc + cfg.noise_level * noise(rng);
  }

  double peak = 1e-9;
  for (double s : wav.samples) peak = std::max(peak, std::abs(s));
  const double gain = 0.45 / peak;
  for (auto& s : wav.samples) s *= gain;
  return wav;
}

// Writes wavs/<utt_id>.wav under out_dir plus a manifest file, balanced
// genders, deterministic in the seed.
inline Manifest synth_corpus(int n_speakers, int utts_per_speaker, uint64_t seed,
                             const std::string& out_dir, const SynthConfig& cfg = {}) {
  if (n_speakers < 2) throw InvalidConfigError("synth_corpus: need at least 2 speakers");
  if (utts_per_speaker < 1) throw InvalidConfigError("synth_corpus: need at least 1 utt");
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wavs");

  Manifest manifest;
  manifest.base_dir = out_dir;
  for (int s = 0; s < n_speakers; ++s) {
    const SynthSpeakerSpec spec = make_speaker_spec(s, n_speakers, seed);
    for (int u = 0; u < utts_per_speaker; ++u) {
      char ubuf[48];
      std::snprintf(ubuf, sizeof(ubuf), "%s_utt%03d", spec.speaker_id.c_str(), u);
      const uint64_t utt_seed = mix_seed(mix_seed(seed, 0x5000 + static_cast<uint64_t>(s)),
                                         static_cast<uint64_t>(u));
      const Waveform wav = synth_utterance(spec, utt_seed, cfg);
      const std::string rel = std::string("wavs/") + ubuf + ".wav";
      write_wav((fs::path(out_dir) / rel).string(), wav);
      manifest.entries.push_back({ubuf, spec.speaker_id, spec.gender, rel, ""});
    }
  }
  manifest.write((fs::path(out_dir) / "manifest.txt").string());
  return manifest;
}

}  // namespace dsv
