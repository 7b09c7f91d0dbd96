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

#include "dsv/common.hpp"
#include "dsv/ssl_provider.hpp"

namespace dsv {

// Trainable per-layer aggregation weights. By default raw weights are
// softmax-normalized before the sum, so effective weights are positive and
// sum to one; raw mode is kept for ablation.
struct LayerWeights {
  Vector raw;
  bool softmax_norm = true;

  static LayerWeights zeros(int n, bool softmax_norm = true) {
    LayerWeights w;
    w.raw = Vector::Zero(n);
    w.softmax_norm = softmax_norm;
    return w;
  }

  Vector effective() const {
    if (!softmax_norm) return raw;
    const double m = raw.maxCoeff();
    Vector e = (raw.array() - m).exp();
    return e / e.sum();
  }
};

inline FeatureMatrix weighted_layer_sum(const LayerStack& stack, const LayerWeights& weights) {
  stack.validate();
  if (weights.raw.size() != stack.layer_count())
    throw InvalidInputError("weighted_layer_sum: weight length " +
                            std::to_string(weights.raw.size()) + " != layer count " +
                            std::to_string(stack.layer_count()));
  const Vector w = weights.effective();
  if (!w.allFinite()) throw NumericDomainError("weighted_layer_sum: non-finite weights");
  FeatureMatrix out;
  out.frame_rate = stack.frame_rate;
  out.values = Matrix::Zero(stack.frames(), stack.dim());
  for (int l = 0; l < stack.layer_count(); ++l)
    out.values += w(l) * stack.layers[static_cast<size_t>(l)];
  return out;
}

// Gradient of a scalar loss w.r.t. raw weights, given the loss gradient
// w.r.t. the summed output.
inline Vector weighted_layer_sum_backward(const LayerStack& stack, const LayerWeights& weights,
                                          const Matrix& grad_out) {
  if (weights.raw.size() != stack.layer_count())
    throw InvalidInputError("weighted_layer_sum_backward: weight length mismatch");
  Vector g_eff(stack.layer_count());
  for (int l = 0; l < stack.layer_count(); ++l)
    g_eff(l) = (grad_out.array() * stack.layers[static_cast<size_t>(l)].array()).sum();
  if (!weights.softmax_norm) return g_eff;
  const Vector w = weights.effective();
  const double dot = w.dot(g_eff);
  return (w.array() * (g_eff.array() - dot)).matrix();
}

}  // namespace dsv
