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

#include <random>
#include <string>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/rng.hpp"

namespace dsv {

// Named trainable parameter with an accumulated gradient. matrix_like marks
// genuine 2-D weights (eligible for the orthogonalized-momentum update);
// biases and other vectors are not.
struct Tensor {
  std::string name;
  Matrix value;
  Matrix grad;
  bool matrix_like = true;

  void zero_grad() { grad.setZero(); }
};

using ParamRefs = std::vector<Tensor*>;

inline Tensor make_param(std::string name, Eigen::Index rows, Eigen::Index cols,
                         double bound, std::mt19937_64& rng, bool matrix_like = true) {
  Tensor t;
  t.name = std::move(name);
  t.value.resize(rows, cols);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) t.value(r, c) = dist(rng);
  t.grad = Matrix::Zero(rows, cols);
  t.matrix_like = matrix_like;
  return t;
}

// ---------------------------------------------------------------------------
// Activations (value-cached backward forms).
// ---------------------------------------------------------------------------

inline Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }
inline Matrix relu_backward(const Matrix& y, const Matrix& gy) {
  return (y.array() > 0.0).select(gy, Matrix::Zero(gy.rows(), gy.cols()));
}
inline Matrix tanh_forward(const Matrix& x) { return x.array().tanh(); }
inline Matrix tanh_backward(const Matrix& y, const Matrix& gy) {
  return (gy.array() * (1.0 - y.array().square())).matrix();
}
inline Matrix sigmoid(const Matrix& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}
inline Matrix sigmoid_backward(const Matrix& y, const Matrix& gy) {
  return (gy.array() * y.array() * (1.0 - y.array())).matrix();
}

// ---------------------------------------------------------------------------
// Fully connected: y = x W + b with x row-major over frames (T x in).
// ---------------------------------------------------------------------------

struct Linear {
  Tensor w;  // in x out
  Tensor b;  // 1 x out

  Linear() = default;
  Linear(const std::string& prefix, int in_dim, int out_dim, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    w = make_param(prefix + ".w", in_dim, out_dim, bound, rng, true);
    b = make_param(prefix + ".b", 1, out_dim, bound, rng, false);
  }

  Matrix forward(const Matrix& x) const {
    return (x * w.value).rowwise() + b.value.row(0);
  }

  // Accumulates parameter grads, returns grad w.r.t. x.
  Matrix backward(const Matrix& x, const Matrix& gy) {
    w.grad.noalias() += x.transpose() * gy;
    b.grad.row(0) += gy.colwise().sum();
    return gy * w.value.transpose();
  }

  void collect(ParamRefs& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

// ---------------------------------------------------------------------------
// 1-D convolution over time with same padding and dilation. Input T x Cin,
// output T x Cout. Weight rows are laid out as K blocks of Cin.
// ---------------------------------------------------------------------------

struct Conv1d {
  int in_ch = 0, out_ch = 0, kernel = 1, dilation = 1;
  Tensor w;  // (K * Cin) x Cout
  Tensor b;  // 1 x Cout

  Conv1d() = default;
  Conv1d(const std::string& prefix, int in_ch_, int out_ch_, int kernel_, int dilation_,
         std::mt19937_64& rng)
      : in_ch(in_ch_), out_ch(out_ch_), kernel(kernel_), dilation(dilation_) {
    if (kernel < 1 || kernel % 2 == 0)
      throw InvalidConfigError("conv1d: kernel must be odd and >= 1");
    if (dilation < 1) throw InvalidConfigError("conv1d: dilation must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * kernel));
    w = make_param(prefix + ".w", static_cast<Eigen::Index>(kernel) * in_ch, out_ch, bound,
                   rng, true);
    b = make_param(prefix + ".b", 1, out_ch, bound, rng, false);
  }

  Matrix forward(const Matrix& x) const {
    const Eigen::Index T = x.rows();
    Matrix y = Matrix::Zero(T, out_ch);
    y.rowwise() += b.value.row(0);
    const int half = (kernel - 1) / 2;
    for (int k = 0; k < kernel; ++k) {
      const Eigen::Index off = static_cast<Eigen::Index>(k - half) * dilation;
      const Eigen::Index t0 = std::max<Eigen::Index>(0, -off);
      const Eigen::Index t1 = std::min<Eigen::Index>(T, T - off);
      if (t1 <= t0) continue;
      const auto wk = w.value.middleRows(static_cast<Eigen::Index>(k) * in_ch, in_ch);
      y.middleRows(t0, t1 - t0).noalias() += x.middleRows(t0 + off, t1 - t0) * wk;
    }
    return y;
  }

  Matrix backward(const Matrix& x, const Matrix& gy) {
    const Eigen::Index T = x.rows();
    Matrix gx = Matrix::Zero(T, in_ch);
    b.grad.row(0) += gy.colwise().sum();
    const int half = (kernel - 1) / 2;
    for (int k = 0; k < kernel; ++k) {
      const Eigen::Index off = static_cast<Eigen::Index>(k - half) * dilation;
      const Eigen::Index t0 = std::max<Eigen::Index>(0, -off);
      const Eigen::Index t1 = std::min<Eigen::Index>(T, T - off);
      if (t1 <= t0) continue;
      const auto rows = t1 - t0;
      auto wk = w.value.middleRows(static_cast<Eigen::Index>(k) * in_ch, in_ch);
      w.grad.middleRows(static_cast<Eigen::Index>(k) * in_ch, in_ch).noalias() +=
          x.middleRows(t0 + off, rows).transpose() * gy.middleRows(t0, rows);
      gx.middleRows(t0 + off, rows).noalias() += gy.middleRows(t0, rows) * wk.transpose();
    }
    return gx;
  }

  void collect(ParamRefs& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

// ---------------------------------------------------------------------------
// Inverted dropout; mask cached by the caller for the backward pass.
// ---------------------------------------------------------------------------

inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p,
                           std::mt19937_64& rng) {
  if (p < 0.0 || p >= 1.0) throw InvalidConfigError("dropout rate must be in [0, 1)");
  Matrix mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) mask(r, c) = keep(rng) ? scale : 0.0;
  return mask;
}

}  // namespace dsv
