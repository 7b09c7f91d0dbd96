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

#include <algorithm>
#include <random>

#include "dsv/common.hpp"
#include "dsv/rng.hpp"

namespace dsv {

enum class FillMode { kZero, kMean };

struct SpecAugConfig {
  int n_freq_masks = 1;
  int n_time_masks = 1;
  int max_freq_width = 10;
  // <0 selects 5% of the frame count at call time.
  int max_time_width = -1;
  FillMode fill_mode = FillMode::kZero;
};

// Masks random frequency-channel and time-step bands. Unmasked cells are
// left bit-identical; masks may overlap. Deterministic given rng_seed.
inline FeatureMatrix spec_augment(const FeatureMatrix& feat, const SpecAugConfig& cfg,
                                  uint64_t rng_seed) {
  const Eigen::Index T = feat.frames();
  const Eigen::Index D = feat.dim();
  const int max_time = cfg.max_time_width >= 0
                           ? cfg.max_time_width
                           : static_cast<int>(static_cast<double>(T) * 0.05);
  if (cfg.n_freq_masks < 0 || cfg.n_time_masks < 0)
    throw InvalidConfigError("spec_augment: negative mask count");
  if (cfg.max_freq_width < 0 || cfg.max_freq_width > D)
    throw InvalidConfigError("spec_augment: freq mask width exceeds feature dim");
  if (max_time < 0 || max_time > T)
    throw InvalidConfigError("spec_augment: time mask width exceeds frame count");

  FeatureMatrix out = feat;
  const double fill = cfg.fill_mode == FillMode::kMean ? feat.values.mean() : 0.0;
  auto rng = make_rng(rng_seed);

  for (int i = 0; i < cfg.n_freq_masks; ++i) {
    const auto w = std::uniform_int_distribution<Eigen::Index>(0, cfg.max_freq_width)(rng);
    if (w == 0) continue;
    const auto start = std::uniform_int_distribution<Eigen::Index>(0, D - w)(rng);
    out.values.middleCols(start, w).setConstant(fill);
  }
  for (int i = 0; i < cfg.n_time_masks; ++i) {
    const auto w = std::uniform_int_distribution<Eigen::Index>(0, max_time)(rng);
    if (w == 0) continue;
    const auto start = std::uniform_int_distribution<Eigen::Index>(0, T - w)(rng);
    out.values.middleRows(start, w).setConstant(fill);
  }
  return out;
}

}  // namespace dsv
