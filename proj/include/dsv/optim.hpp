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
#include <cstdint>
#include <map>
#include <string>

#include "dsv/common.hpp"
#include "dsv/nn.hpp"

namespace dsv {

// Triangular cyclical learning rate.
inline double clr_lr(int64_t step, double base_lr, double max_lr, int64_t step_size) {
  if (step < 0 || step_size < 1 || max_lr < base_lr || base_lr < 0.0)
    throw InvalidConfigError("clr: need step >= 0, step_size >= 1, max_lr >= base_lr >= 0");
  const double pos = static_cast<double>(step) / static_cast<double>(step_size);
  const auto cycle = static_cast<int64_t>(std::floor(1.0 + pos / 2.0)) - 1;
  const double x = std::abs(pos - static_cast<double>(2 * cycle + 1));
  return base_lr + (max_lr - base_lr) * std::max(0.0, 1.0 - x);
}

// ---------------------------------------------------------------------------
// Quintic Newton-Schulz orthogonalization. The default coefficient set is the
// aggressive momentum-orthogonalization variant: five iterations land the
// singular values in a loose band around 1 rather than converging. The
// classical polar coefficients converge to the polar factor as iterations
// grow; see NewtonSchulzOptions::polar().
// ---------------------------------------------------------------------------

struct NewtonSchulzOptions {
  int iterations = 5;
  double a = 3.4445;
  double b = -4.7750;
  double c = 2.0315;

  static NewtonSchulzOptions muon() { return {}; }
  static NewtonSchulzOptions polar(int iterations = 30) {
    return {iterations, 15.0 / 8.0, -10.0 / 8.0, 3.0 / 8.0};
  }
};

inline Matrix newton_schulz_orthogonalize(const Matrix& m,
                                          const NewtonSchulzOptions& opts = {}) {
  if (m.rows() < 1 || m.cols() < 1)
    throw InvalidInputError("newton_schulz: empty matrix");
  if (!m.allFinite()) throw NumericDomainError("newton_schulz: non-finite input");
  const bool transposed = m.rows() > m.cols();
  Matrix x = transposed ? m.transpose() : m;
  x /= x.norm() + 1e-7;  // Frobenius normalization
  for (int i = 0; i < opts.iterations; ++i) {
    const Matrix gram = x * x.transpose();
    const Matrix poly = opts.b * gram + opts.c * gram * gram;
    x = opts.a * x + poly * x;
  }
  return transposed ? Matrix(x.transpose()) : x;
}

// ---------------------------------------------------------------------------
// Optimizers. One object serves a whole parameter collection; per-tensor
// state is keyed by tensor name so checkpoints can round-trip it.
// ---------------------------------------------------------------------------

enum class OptimizerKind { kAdamW, kOrthogonalMomentum };

inline std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::kAdamW ? "adamw" : "orthogonal_momentum";
}
inline OptimizerKind optimizer_kind_from_string(const std::string& s) {
  if (s == "adamw") return OptimizerKind::kAdamW;
  if (s == "orthogonal_momentum") return OptimizerKind::kOrthogonalMomentum;
  throw InvalidConfigError("unknown optimizer: " + s);
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdamW;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double muon_momentum = 0.95;
  NewtonSchulzOptions newton_schulz = NewtonSchulzOptions::muon();
};

class Optimizer {
 public:
  explicit Optimizer(const OptimizerConfig& cfg = {}) : cfg_(cfg) {}

  const OptimizerConfig& config() const { return cfg_; }
  int64_t step_count() const { return step_; }

  // Applies one update using the gradients accumulated in the tensors.
  void step(const ParamRefs& params, double lr) {
    ++step_;
    for (Tensor* t : params) {
      if (!t->grad.allFinite())
        throw TrainingError("non-finite gradient in " + t->name);
      if (cfg_.kind == OptimizerKind::kOrthogonalMomentum && t->matrix_like &&
          t->value.rows() > 1 && t->value.cols() > 1) {
        muon_update(*t, lr);
      } else {
        adamw_update(*t, lr);
      }
    }
  }

  // Serialization: flat name -> matrix map plus the step counter.
  std::map<std::string, Matrix> state_arrays() const {
    std::map<std::string, Matrix> out;
    for (const auto& [name, s] : adam_) {
      out["opt.adam.m." + name] = s.m;
      out["opt.adam.v." + name] = s.v;
    }
    for (const auto& [name, m] : momentum_) out["opt.muon.m." + name] = m;
    return out;
  }

  void load_state_arrays(const std::map<std::string, Matrix>& arrays, int64_t step) {
    adam_.clear();
    momentum_.clear();
    step_ = step;
    for (const auto& [key, m] : arrays) {
      if (key.rfind("opt.adam.m.", 0) == 0)
        adam_[key.substr(11)].m = m;
      else if (key.rfind("opt.adam.v.", 0) == 0)
        adam_[key.substr(11)].v = m;
      else if (key.rfind("opt.muon.m.", 0) == 0)
        momentum_[key.substr(11)] = m;
    }
  }

 private:
  struct AdamState {
    Matrix m, v;
  };

  void adamw_update(Tensor& t, double lr) {
    AdamState& s = adam_[t.name];
    if (s.m.rows() != t.value.rows() || s.m.cols() != t.value.cols()) {
      s.m = Matrix::Zero(t.value.rows(), t.value.cols());
      s.v = Matrix::Zero(t.value.rows(), t.value.cols());
    }
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * t.grad;
    s.v = (cfg_.beta2 * s.v.array() + (1.0 - cfg_.beta2) * t.grad.array().square()).matrix();
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const Matrix update =
        ((s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + cfg_.eps)).matrix();
    t.value -= lr * (update + cfg_.weight_decay * t.value);
  }

  void muon_update(Tensor& t, double lr) {
    Matrix& m = momentum_[t.name];
    if (m.rows() != t.value.rows() || m.cols() != t.value.cols())
      m = Matrix::Zero(t.value.rows(), t.value.cols());
    m = cfg_.muon_momentum * m + t.grad;
    const Matrix direction = newton_schulz_orthogonalize(m, cfg_.newton_schulz);
    const double scale = std::sqrt(std::max(
        1.0, static_cast<double>(t.value.rows()) / static_cast<double>(t.value.cols())));
    t.value -= lr * scale * direction;
  }

  OptimizerConfig cfg_;
  int64_t step_ = 0;
  std::map<std::string, AdamState> adam_;
  std::map<std::string, Matrix> momentum_;
};

}  // namespace dsv
