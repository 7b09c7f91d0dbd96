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

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dsv/common.hpp"

namespace dsv {

enum class FusionMode { kSslOnly, kFbankOnly, kRawLevel, kMidLevel };

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kSslOnly: return "ssl_only";
    case FusionMode::kFbankOnly: return "fbank_only";
    case FusionMode::kRawLevel: return "raw_level";
    case FusionMode::kMidLevel: return "mid_level";
  }
  return "?";
}

inline FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "ssl_only") return FusionMode::kSslOnly;
  if (s == "fbank_only") return FusionMode::kFbankOnly;
  if (s == "raw_level") return FusionMode::kRawLevel;
  if (s == "mid_level") return FusionMode::kMidLevel;
  throw InvalidConfigError("unknown fusion mode: " + s);
}

// Mid-level fusion: elementwise product of the two encoded streams.
inline Matrix fuse_mid(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw InvalidInputError("fuse_mid: shape mismatch " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                            "x" + std::to_string(b.cols()));
  return a.cwiseProduct(b);
}

inline std::pair<Matrix, Matrix> fuse_mid_backward(const Matrix& a, const Matrix& b,
                                                   const Matrix& grad_out) {
  return {grad_out.cwiseProduct(b), grad_out.cwiseProduct(a)};
}

// Raw-level (early) fusion: column concatenation, fed to a single encoder.
inline FeatureMatrix fuse_raw(const FeatureMatrix& h_ssl, const FeatureMatrix& x_fbank) {
  if (h_ssl.frames() != x_fbank.frames())
    throw InvalidInputError("fuse_raw: frame counts differ (" +
                            std::to_string(h_ssl.frames()) + " vs " +
                            std::to_string(x_fbank.frames()) + "); align first");
  if (h_ssl.frames() < 1) throw InvalidInputError("fuse_raw: empty input");
  FeatureMatrix out;
  out.frame_rate = x_fbank.frame_rate;
  out.values.resize(h_ssl.frames(), h_ssl.dim() + x_fbank.dim());
  out.values.leftCols(h_ssl.dim()) = h_ssl.values;
  out.values.rightCols(x_fbank.dim()) = x_fbank.values;
  return out;
}

// Result of aligning two streams onto a common frame grid. row indices map
// every output frame back to its source frame, which is what the backward
// pass needs to scatter gradients.
struct AlignResult {
  FeatureMatrix a, b;
  std::vector<Eigen::Index> a_rows, b_rows;
};

namespace detail {

inline std::vector<Eigen::Index> nearest_rows(Eigen::Index src_frames, double ratio) {
  // target frame t reads source frame round(t * ratio)
  std::vector<Eigen::Index> rows;
  for (Eigen::Index t = 0;; ++t) {
    const auto src = static_cast<Eigen::Index>(std::llround(static_cast<double>(t) * ratio));
    if (src >= src_frames) break;
    rows.push_back(src);
  }
  return rows;
}

}  // namespace detail

// Brings two feature streams to a shared frame count: if the frame rates
// differ, the higher-rate stream is resampled onto the lower-rate grid by
// nearest frame; then both are truncated to the shorter length.
inline AlignResult align_frame_rates(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.frames() < 1 || b.frames() < 1)
    throw InvalidInputError("align_frame_rates: empty input");

  auto identity_rows = [](Eigen::Index n) {
    std::vector<Eigen::Index> rows(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) rows[static_cast<size_t>(i)] = i;
    return rows;
  };

  std::vector<Eigen::Index> rows_a = identity_rows(a.frames());
  std::vector<Eigen::Index> rows_b = identity_rows(b.frames());
  double rate = std::min(a.frame_rate, b.frame_rate);
  if (a.frame_rate > b.frame_rate)
    rows_a = detail::nearest_rows(a.frames(), a.frame_rate / b.frame_rate);
  else if (b.frame_rate > a.frame_rate)
    rows_b = detail::nearest_rows(b.frames(), b.frame_rate / a.frame_rate);

  const size_t n = std::min(rows_a.size(), rows_b.size());
  if (n == 0) throw InvalidInputError("align_frame_rates: no overlapping frames");
  rows_a.resize(n);
  rows_b.resize(n);

  AlignResult out;
  out.a.frame_rate = rate;
  out.b.frame_rate = rate;
  out.a.values.resize(static_cast<Eigen::Index>(n), a.dim());
  out.b.values.resize(static_cast<Eigen::Index>(n), b.dim());
  for (size_t i = 0; i < n; ++i) {
    out.a.values.row(static_cast<Eigen::Index>(i)) = a.values.row(rows_a[i]);
    out.b.values.row(static_cast<Eigen::Index>(i)) = b.values.row(rows_b[i]);
  }
  out.a_rows = std::move(rows_a);
  out.b_rows = std::move(rows_b);
  return out;
}

}  // namespace dsv
