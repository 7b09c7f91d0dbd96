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

#include "dsv/common.hpp"
#include "dsv/nn.hpp"
#include "dsv/rng.hpp"

namespace dsv {

// Fixed-dimensional utterance embedding.
struct SpeakerEmbedding {
  Vector vector;
  std::string utt_id;
};

// ---------------------------------------------------------------------------
// Attentive statistics pooling: channel-shared attention (bottleneck tanh
// projection, scalar score per frame, softmax over time), then attention-
// weighted mean and floored standard deviation.
// ---------------------------------------------------------------------------

struct AspConfig {
  int in_dim = 0;
  int bottleneck = 0;  // 0: in_dim / 4 (at least 1)
  double epsilon = 1e-6;

  int effective_bottleneck() const {
    return bottleneck > 0 ? bottleneck : std::max(1, in_dim / 4);
  }
  void validate() const {
    if (in_dim < 1) throw InvalidConfigError("asp: in_dim must be >= 1");
    if (epsilon <= 0.0) throw InvalidConfigError("asp: epsilon must be > 0");
  }
};

class AttentiveStatsPool {
 public:
  struct Cache {
    Matrix frames;
    Matrix hidden;  // T x B, post-tanh
    Vector alpha;   // attention weights, sums to 1
    Vector mu;      // C
    Vector m2;      // C, weighted second moment
    Vector sigma;   // C
    std::vector<bool> floored;
  };

  AttentiveStatsPool() = default;
  AttentiveStatsPool(const AspConfig& cfg, uint64_t seed, const std::string& prefix = "asp")
      : cfg_(cfg) {
    cfg_.validate();
    auto rng = make_rng(mix_seed(seed, 0xa59));
    const int B = cfg_.effective_bottleneck();
    att_ = Linear(prefix + ".att", cfg_.in_dim, B, rng);
    score_w_ = make_param(prefix + ".score_w", B, 1,
                          1.0 / std::sqrt(static_cast<double>(B)), rng, true);
    score_b_ = make_param(prefix + ".score_b", 1, 1, 0.0, rng, false);
  }

  const AspConfig& config() const { return cfg_; }
  int out_dim() const { return 2 * cfg_.in_dim; }

  Vector forward(const Matrix& frames, Cache& cache) const {
    if (frames.rows() < 1) throw InvalidInputError("asp: empty frame sequence");
    if (frames.cols() != cfg_.in_dim)
      throw InvalidInputError("asp: frame dim " + std::to_string(frames.cols()) +
                              " != configured " + std::to_string(cfg_.in_dim));
    const Eigen::Index T = frames.rows();
    const Eigen::Index C = frames.cols();

    cache.frames = frames;
    cache.hidden = tanh_forward(att_.forward(frames));
    Vector scores = (cache.hidden * score_w_.value).col(0);
    scores.array() += score_b_.value(0, 0);
    const double mx = scores.maxCoeff();
    Vector ex = (scores.array() - mx).exp();
    cache.alpha = ex / ex.sum();

    cache.mu = frames.transpose() * cache.alpha;
    cache.m2 = frames.array().square().matrix().transpose() * cache.alpha;
    cache.sigma.resize(C);
    cache.floored.assign(static_cast<size_t>(C), false);
    const double eps2 = cfg_.epsilon * cfg_.epsilon;
    for (Eigen::Index c = 0; c < C; ++c) {
      const double var = cache.m2(c) - cache.mu(c) * cache.mu(c);
      if (var <= eps2) {
        cache.sigma(c) = cfg_.epsilon;
        cache.floored[static_cast<size_t>(c)] = true;
      } else {
        cache.sigma(c) = std::sqrt(var);
      }
    }
    Vector out(2 * C);
    out.head(C) = cache.mu;
    out.tail(C) = cache.sigma;
    (void)T;
    return out;
  }

  // grad_out has length 2C ([d_mu; d_sigma]); returns grad w.r.t. frames.
  Matrix backward(const Cache& cache, const Vector& grad_out) {
    const Eigen::Index T = cache.frames.rows();
    const Eigen::Index C = cache.frames.cols();
    Vector g_mu = grad_out.head(C);
    const Vector g_sigma = grad_out.tail(C);

    Vector g_var = Vector::Zero(C);
    for (Eigen::Index c = 0; c < C; ++c)
      if (!cache.floored[static_cast<size_t>(c)])
        g_var(c) = g_sigma(c) * 0.5 / cache.sigma(c);
    g_mu.array() += -2.0 * cache.mu.array() * g_var.array();

    // moment terms
    Matrix g_frames = cache.alpha *
                      g_mu.transpose();  // T x C via outer product
    g_frames.array() +=
        2.0 * (cache.alpha * g_var.transpose()).array() * cache.frames.array();

    // attention weight terms
    Vector g_alpha = cache.frames * g_mu +
                     cache.frames.array().square().matrix() * g_var;
    const double dot = cache.alpha.dot(g_alpha);
    Vector g_scores = (cache.alpha.array() * (g_alpha.array() - dot)).matrix();

    score_w_.grad.noalias() += cache.hidden.transpose() * g_scores;
    score_b_.grad(0, 0) += g_scores.sum();
    Matrix g_hidden = g_scores * score_w_.value.transpose();
    g_hidden = tanh_backward(cache.hidden, g_hidden);
    g_frames += att_.backward(cache.frames, g_hidden);
    return g_frames;
  }

  void collect(ParamRefs& out) {
    att_.collect(out);
    out.push_back(&score_w_);
    out.push_back(&score_b_);
  }

 private:
  AspConfig cfg_;
  Linear att_;
  Tensor score_w_, score_b_;
};

// ---------------------------------------------------------------------------
// AAM-Softmax head: cosine logits against class prototypes, additive angular
// margin on the target class, scaled cross-entropy.
// ---------------------------------------------------------------------------

struct AamConfig {
  double margin = 0.2;  // radians
  double scale = 30.0;

  void validate() const {
    if (margin < 0.0 || margin >= M_PI / 2)
      throw InvalidConfigError("aam: margin must be in [0, pi/2)");
    if (scale <= 0.0) throw InvalidConfigError("aam: scale must be > 0");
  }
};

class AamHead {
 public:
  struct Cache {
    Vector emb;
    double emb_norm = 0.0;
    Vector cosines;     // per class
    Vector logits;      // scaled, with margin on the target
    Vector probs;
    int label = -1;
    double dphi_dcos = 1.0;
  };

  AamHead() = default;
  AamHead(int n_classes, int emb_dim, uint64_t seed, const std::string& name = "head") {
    if (n_classes < 2) throw InvalidConfigError("aam: need at least 2 classes");
    if (emb_dim < 1) throw InvalidConfigError("aam: emb_dim must be >= 1");
    auto rng = make_rng(mix_seed(seed, 0x4ead));
    prototypes_ = make_param(name + ".prototypes", n_classes, emb_dim,
                             1.0 / std::sqrt(static_cast<double>(emb_dim)), rng, true);
  }

  int n_classes() const { return static_cast<int>(prototypes_.value.rows()); }
  int emb_dim() const { return static_cast<int>(prototypes_.value.cols()); }
  const Tensor& prototypes() const { return prototypes_; }

  // Fresh prototypes, nothing else. Callers use this at stage boundaries.
  void replace(int new_n_classes, uint64_t seed) {
    if (new_n_classes < 2) throw InvalidConfigError("aam: need at least 2 classes");
    auto rng = make_rng(mix_seed(seed, 0x4ead));
    const std::string name = prototypes_.name;
    prototypes_ = make_param(name, new_n_classes, emb_dim(),
                             1.0 / std::sqrt(static_cast<double>(emb_dim())), rng, true);
  }

  double loss(const Vector& emb, int label, const AamConfig& cfg, Cache& cache) const {
    cfg.validate();
    if (emb.size() != emb_dim())
      throw InvalidInputError("aam: embedding dim " + std::to_string(emb.size()) +
                              " != head dim " + std::to_string(emb_dim()));
    if (label < 0 || label >= n_classes())
      throw InvalidDataError("aam: label " + std::to_string(label) + " outside head size " +
                             std::to_string(n_classes()));
    const double norm = emb.norm();
    if (norm < 1e-12) throw NumericDomainError("aam: zero-norm embedding");
    const Vector unit = emb / norm;

    const int n = n_classes();
    cache.emb = emb;
    cache.emb_norm = norm;
    cache.label = label;
    cache.cosines.resize(n);
    for (int j = 0; j < n; ++j) {
      const double wn = prototypes_.value.row(j).norm();
      if (wn < 1e-12) throw NumericDomainError("aam: zero-norm prototype " + std::to_string(j));
      double c = prototypes_.value.row(j).dot(unit) / wn;
      cache.cosines(j) = std::clamp(c, -1.0, 1.0);
    }

    // cos(theta + m) without arccos: cos*cos_m - sin*sin_m, sin clamped at 0
    const double cos_y = cache.cosines(label);
    const double sin_y = std::sqrt(std::max(1.0 - cos_y * cos_y, 0.0));
    const double phi = cos_y * std::cos(cfg.margin) - sin_y * std::sin(cfg.margin);
    cache.dphi_dcos =
        std::cos(cfg.margin) + cos_y / std::max(sin_y, 1e-7) * std::sin(cfg.margin);

    cache.logits = cfg.scale * cache.cosines;
    cache.logits(label) = cfg.scale * phi;

    const double mx = cache.logits.maxCoeff();
    Vector ex = (cache.logits.array() - mx).exp();
    const double z = ex.sum();
    cache.probs = ex / z;
    return std::log(z) - (cache.logits(label) - mx);
  }

  // Returns grad w.r.t. the embedding; accumulates prototype grads.
  Vector backward(const Cache& cache, const AamConfig& cfg, double grad_loss = 1.0) {
    const int n = n_classes();
    Vector dz = cache.probs * grad_loss;
    dz(cache.label) -= grad_loss;

    Vector dcos = cfg.scale * dz;
    dcos(cache.label) *= cache.dphi_dcos;

    const Vector unit = cache.emb / cache.emb_norm;
    Vector g_emb = Vector::Zero(emb_dim());
    for (int j = 0; j < n; ++j) {
      const double wn = prototypes_.value.row(j).norm();
      const Vector w_unit = prototypes_.value.row(j).transpose() / wn;
      const double c = cache.cosines(j);
      g_emb += dcos(j) * (w_unit - c * unit) / cache.emb_norm;
      prototypes_.grad.row(j) += (dcos(j) * (unit - c * w_unit) / wn).transpose();
    }
    return g_emb;
  }

  void collect(ParamRefs& out) { out.push_back(&prototypes_); }

 private:
  Tensor prototypes_;
};

}  // namespace dsv
