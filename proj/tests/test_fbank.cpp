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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "dsv/fbank.hpp"
#include "testutil.hpp"

using dsv::FbankConfig;
using dsv::Waveform;

namespace {

Waveform tone(double freq_hz, double seconds, int sr = 16000, double amp = 0.5) {
  Waveform w;
  w.sample_rate = sr;
  w.samples.resize(static_cast<size_t>(seconds * sr));
  for (size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = amp * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / sr);
  return w;
}

// Independent mel math for the oracle below.
double oracle_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double oracle_mel_inv(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

TEST_CASE("silence maps every cell to the log floor") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(16000, 0.0);
  FbankConfig cfg;
  auto feat = dsv::compute_fbank(w, cfg);
  REQUIRE(feat.dim() == 80);
  REQUIRE(feat.frames() == 1 + (16000 - 400) / 160);
  const double expected = std::log(cfg.log_floor);
  REQUIRE((feat.values.array() == expected).all());
}

TEST_CASE("paper default yields 80-dimensional features") {
  auto feat = dsv::compute_fbank(tone(440.0, 0.5), FbankConfig{});
  REQUIRE(feat.dim() == 80);
  REQUIRE(feat.frame_rate == Catch::Approx(100.0));
}

TEST_CASE("pure tone at a mel bin center peaks in that bin") {
  FbankConfig cfg;
  const int sr = 16000;
  for (int k : {12, 30, 55}) {
    // center frequency computed from scratch, not via library helpers
    const double mel_lo = oracle_mel(cfg.low_freq_hz);
    const double mel_hi = oracle_mel(sr / 2.0);
    const double center_hz =
        oracle_mel_inv(mel_lo + (mel_hi - mel_lo) * (k + 1) / (cfg.n_mels + 1));

    auto feat = dsv::compute_fbank(tone(center_hz, 1.0, sr), cfg);
    Eigen::Index argmax = 0;
    feat.values.colwise().mean().maxCoeff(&argmax);
    REQUIRE(argmax == k);
  }
}

TEST_CASE("first frame matches a brute-force DFT + triangle oracle") {
  const int sr = 16000;
  FbankConfig cfg;
  cfg.n_mels = 24;
  cfg.fft_size = 512;
  Waveform w = tone(613.7, 0.05, sr, 0.4);
  auto feat = dsv::compute_fbank(w, cfg);

  // replicate frame 0 by hand: pre-emphasis, Hamming window, naive DFT,
  // independently built mel triangles
  const int win = 400;
  std::vector<double> frame(512, 0.0);
  for (int i = 0; i < win; ++i) {
    const double prev = i == 0 ? w.samples[0] : w.samples[static_cast<size_t>(i) - 1];
    const double emph = w.samples[static_cast<size_t>(i)] - cfg.preemphasis * prev;
    frame[static_cast<size_t>(i)] =
        emph * (0.54 - 0.46 * std::cos(2.0 * M_PI * i / (win - 1)));
  }
  const auto power = testutil::naive_dft_power(frame);

  const double mel_lo = oracle_mel(cfg.low_freq_hz);
  const double mel_hi = oracle_mel(sr / 2.0);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = mel_lo + (mel_hi - mel_lo) * m / (cfg.n_mels + 1);
    const double center = mel_lo + (mel_hi - mel_lo) * (m + 1) / (cfg.n_mels + 1);
    const double right = mel_lo + (mel_hi - mel_lo) * (m + 2) / (cfg.n_mels + 1);
    double energy = 0.0;
    for (size_t kbin = 0; kbin < power.size(); ++kbin) {
      const double mel = oracle_mel(static_cast<double>(kbin) * sr / 512.0);
      double wgt = 0.0;
      if (mel > left && mel < right)
        wgt = mel <= center ? (mel - left) / (center - left) : (right - mel) / (right - center);
      energy += wgt * power[kbin];
    }
    const double expected = std::log(std::max(energy, cfg.log_floor));
    REQUIRE(feat.values(0, m) == Catch::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("waveform shorter than one window is rejected") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(399, 0.1);  // window is 400 samples at 25 ms
  REQUIRE_THROWS_AS(dsv::compute_fbank(w, FbankConfig{}), dsv::InvalidInputError);
}

TEST_CASE("appending sub-hop silence never changes existing frames") {
  auto rng = std::mt19937_64(7);
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(11753);
  std::normal_distribution<double> dist(0.0, 0.1);
  for (auto& s : w.samples) s = dist(rng);

  auto base = dsv::compute_fbank(w, FbankConfig{});
  for (int extra : {1, 50, 159}) {  // hop is 160 samples
    Waveform longer = w;
    longer.samples.insert(longer.samples.end(), static_cast<size_t>(extra), 0.0);
    auto feat = dsv::compute_fbank(longer, FbankConfig{});
    REQUIRE(feat.frames() >= base.frames());
    REQUIRE((feat.values.topRows(base.frames()) - base.values).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("invalid fbank configs are rejected") {
  Waveform w = tone(440.0, 0.2);
  FbankConfig bad_hop;
  bad_hop.hop_ms = 30.0;  // > window
  REQUIRE_THROWS_AS(dsv::compute_fbank(w, bad_hop), dsv::InvalidConfigError);
  FbankConfig bad_fft;
  bad_fft.fft_size = 256;  // < 400-sample window
  REQUIRE_THROWS_AS(dsv::compute_fbank(w, bad_fft), dsv::InvalidConfigError);
  FbankConfig bad_mels;
  bad_mels.n_mels = 0;
  REQUIRE_THROWS_AS(dsv::compute_fbank(w, bad_mels), dsv::InvalidConfigError);
}
