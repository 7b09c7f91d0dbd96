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

#include <map>
#include <optional>
#include <string>

#include "dsv/common.hpp"
#include "dsv/encoder.hpp"
#include "dsv/fbank.hpp"
#include "dsv/fusion.hpp"
#include "dsv/heads.hpp"
#include "dsv/layer_sum.hpp"
#include "dsv/specaug.hpp"
#include "dsv/ssl_provider.hpp"

namespace dsv {

enum class StreamKind { kSsl, kFbank };

struct ModelConfig {
  FusionMode mode = FusionMode::kMidLevel;
  FbankConfig fbank;
  int ssl_layers = 4;
  int ssl_dim = 32;
  bool layer_weight_softmax = true;
  int channels = 64;
  int n_blocks = 3;
  std::vector<int> dilations = {2, 3, 4};
  int res2_scale = 4;
  int se_bottleneck = 0;
  int stream_out_dim = 64;  // shared by both stream encoders (fusion needs it)
  int stem_kernel = 5;
  int block_kernel = 3;
  int asp_bottleneck = 0;
  double asp_epsilon = 1e-6;
  int emb_dim = 192;
  AamConfig aam;
  int n_classes = 2;
  SpecAugConfig specaug;
  bool use_specaug = true;

  bool uses_ssl() const { return mode != FusionMode::kFbankOnly; }
  bool uses_fbank() const { return mode != FusionMode::kSslOnly; }

  EncoderConfig encoder_config(int in_dim) const {
    EncoderConfig e;
    e.in_dim = in_dim;
    e.channels = channels;
    e.n_blocks = n_blocks;
    e.dilations = dilations;
    e.res2_scale = res2_scale;
    e.se_bottleneck = se_bottleneck;
    e.out_dim = stream_out_dim;
    e.stem_kernel = stem_kernel;
    e.block_kernel = block_kernel;
    return e;
  }
};

// Per-utterance input bundle; streams the active mode does not use may stay
// empty.
struct UttFeatures {
  FeatureMatrix fbank;
  LayerStack stack;
};

class DualStreamModel {
 public:
  struct Cache {
    const LayerStack* stack = nullptr;
    FeatureMatrix fbank_in;
    FeatureMatrix h_ssl;
    AlignResult align;
    bool aligned = false;
    EcapaEncoder::Cache enc_ssl, enc_fbank, enc_raw;
    Matrix frames_ssl, frames_fbank, fused;
    AttentiveStatsPool::Cache asp;
    Matrix pooled_row;  // 1 x 2C
    Matrix emb_row;     // 1 x emb_dim
    AamHead::Cache head;
  };

  DualStreamModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg), seed_(seed) {
    if (cfg_.emb_dim < 1) throw InvalidConfigError("model: emb_dim must be >= 1");
    if (cfg_.uses_ssl() && (cfg_.ssl_layers < 1 || cfg_.ssl_dim < 1))
      throw InvalidConfigError("model: ssl_layers and ssl_dim must be >= 1");
    cfg_.aam.validate();

    lw_.name = "layer_weights.raw";
    lw_.value = Matrix::Zero(cfg_.ssl_layers, 1);
    lw_.grad = Matrix::Zero(cfg_.ssl_layers, 1);
    lw_.matrix_like = false;

    switch (cfg_.mode) {
      case FusionMode::kMidLevel:
        enc_ssl_.emplace(cfg_.encoder_config(cfg_.ssl_dim), mix_seed(seed, 1), "enc_ssl");
        enc_fbank_.emplace(cfg_.encoder_config(cfg_.fbank.n_mels), mix_seed(seed, 2),
                           "enc_fbank");
        break;
      case FusionMode::kSslOnly:
        enc_ssl_.emplace(cfg_.encoder_config(cfg_.ssl_dim), mix_seed(seed, 1), "enc_ssl");
        break;
      case FusionMode::kFbankOnly:
        enc_fbank_.emplace(cfg_.encoder_config(cfg_.fbank.n_mels), mix_seed(seed, 2),
                           "enc_fbank");
        break;
      case FusionMode::kRawLevel:
        enc_raw_.emplace(cfg_.encoder_config(cfg_.ssl_dim + cfg_.fbank.n_mels),
                         mix_seed(seed, 3), "enc_raw");
        break;
    }

    AspConfig asp_cfg;
    asp_cfg.in_dim = cfg_.stream_out_dim;
    asp_cfg.bottleneck = cfg_.asp_bottleneck;
    asp_cfg.epsilon = cfg_.asp_epsilon;
    asp_ = AttentiveStatsPool(asp_cfg, mix_seed(seed, 4), "asp");

    auto rng = make_rng(mix_seed(seed, 5));
    proj_ = Linear("proj", 2 * cfg_.stream_out_dim, cfg_.emb_dim, rng);
    head_ = AamHead(cfg_.n_classes, cfg_.emb_dim, mix_seed(seed, 6));
  }

  const ModelConfig& config() const { return cfg_; }
  int emb_dim() const { return cfg_.emb_dim; }
  int n_classes() const { return head_.n_classes(); }

  LayerWeights layer_weights() const {
    LayerWeights w;
    w.raw = lw_.value.col(0);
    w.softmax_norm = cfg_.layer_weight_softmax;
    return w;
  }

  // ---- forward / backward ------------------------------------------------

  double forward_loss(const UttFeatures& feats, int label, bool training, double dropout,
                      std::mt19937_64* rng, Cache& cache) {
    forward_to_embedding(feats, training, dropout, rng, cache);
    return head_.loss(cache.emb_row.row(0).transpose(), label, cfg_.aam, cache.head);
  }

  void backward(Cache& cache, double grad_loss = 1.0) {
    const Vector g_emb = head_.backward(cache.head, cfg_.aam, grad_loss);
    const Matrix g_pooled = proj_.backward(cache.pooled_row, g_emb.transpose());
    const Matrix g_frames = asp_.backward(cache.asp, g_pooled.row(0).transpose());

    switch (cfg_.mode) {
      case FusionMode::kMidLevel: {
        auto [g_a, g_b] = fuse_mid_backward(cache.frames_ssl, cache.frames_fbank, g_frames);
        const Matrix g_ha = enc_ssl_->backward(cache.enc_ssl, g_a);
        enc_fbank_->backward(cache.enc_fbank, g_b);  // fbank features are not trainable
        accumulate_layer_weight_grads(cache, scatter_rows(g_ha, cache.align.a_rows,
                                                          cache.h_ssl.frames()));
        break;
      }
      case FusionMode::kSslOnly: {
        const Matrix g_h = enc_ssl_->backward(cache.enc_ssl, g_frames);
        accumulate_layer_weight_grads(cache, g_h);
        break;
      }
      case FusionMode::kFbankOnly:
        enc_fbank_->backward(cache.enc_fbank, g_frames);
        break;
      case FusionMode::kRawLevel: {
        const Matrix g_cat = enc_raw_->backward(cache.enc_raw, g_frames);
        const Matrix g_ha = g_cat.leftCols(cfg_.ssl_dim);
        accumulate_layer_weight_grads(cache, scatter_rows(g_ha, cache.align.a_rows,
                                                          cache.h_ssl.frames()));
        break;
      }
    }
  }

  // Deterministic evaluation-mode embedding.
  Vector embed(const UttFeatures& feats) const {
    Cache cache;
    const_cast<DualStreamModel*>(this)->forward_to_embedding(feats, false, 0.0, nullptr,
                                                             cache);
    return cache.emb_row.row(0).transpose();
  }

  // Runs a single stream's encoder on prepared features (diagnostics and
  // stream-independence checks).
  Matrix encode_stream(StreamKind stream, const FeatureMatrix& feat) const {
    const EcapaEncoder& enc = encoder(stream);
    EcapaEncoder::Cache cache;
    return const_cast<EcapaEncoder&>(enc).forward(feat.values, false, 0.0, nullptr, cache);
  }

  // ---- parameters ----------------------------------------------------------

  void collect(ParamRefs& out) {
    collect_backbone(out);
    head_.collect(out);
  }

  void collect_backbone(ParamRefs& out) {
    if (cfg_.uses_ssl()) out.push_back(&lw_);
    if (enc_ssl_) enc_ssl_->collect(out);
    if (enc_fbank_) enc_fbank_->collect(out);
    if (enc_raw_) enc_raw_->collect(out);
    asp_.collect(out);
    proj_.collect(out);
  }

  void zero_grads() {
    ParamRefs refs;
    collect(refs);
    for (auto* t : refs) t->zero_grad();
  }

  uint64_t backbone_checksum() const {
    ParamRefs refs;
    const_cast<DualStreamModel*>(this)->collect_backbone(refs);
    uint64_t h = 0xcbf29ce484222325ull;
    for (const Tensor* t : refs) h = dsv::checksum(t->value, h);
    return h;
  }

  uint64_t full_checksum() const {
    ParamRefs refs;
    const_cast<DualStreamModel*>(this)->collect(refs);
    uint64_t h = 0xcbf29ce484222325ull;
    for (const Tensor* t : refs) h = dsv::checksum(t->value, h);
    return h;
  }

  std::map<std::string, Matrix> param_arrays() const {
    ParamRefs refs;
    const_cast<DualStreamModel*>(this)->collect(refs);
    std::map<std::string, Matrix> out;
    for (const Tensor* t : refs) out[t->name] = t->value;
    return out;
  }

  void load_param_arrays(const std::map<std::string, Matrix>& arrays) {
    ParamRefs refs;
    collect(refs);
    for (Tensor* t : refs) {
      auto it = arrays.find(t->name);
      if (it == arrays.end()) throw InvalidDataError("missing parameter: " + t->name);
      if (it->second.rows() != t->value.rows() || it->second.cols() != t->value.cols())
        throw InvalidDataError("parameter shape mismatch: " + t->name);
      t->value = it->second;
    }
  }

  // Fresh classification prototypes; every backbone parameter is untouched.
  void replace_head(int new_n_classes, uint64_t seed) {
    head_.replace(new_n_classes, seed);
  }

  EncoderParams stream_params(StreamKind stream) const { return encoder(stream).params(); }

  void set_stream_params(StreamKind stream, const EncoderParams& params) {
    const_cast<EcapaEncoder&>(encoder(stream)).set_params(params);
  }

  void swap_stream_params() {
    if (!enc_ssl_ || !enc_fbank_)
      throw InvalidInputError("swap_stream_params: both stream encoders must exist");
    EcapaEncoder tmp(*enc_ssl_);
    enc_ssl_->set_params_from(*enc_fbank_);
    enc_fbank_->set_params_from(tmp);
  }

  const AamHead& head() const { return head_; }

 private:
  const EcapaEncoder& encoder(StreamKind stream) const {
    if (stream == StreamKind::kSsl) {
      if (!enc_ssl_) throw InvalidInputError("model has no SSL stream encoder");
      return *enc_ssl_;
    }
    if (!enc_fbank_) throw InvalidInputError("model has no fbank stream encoder");
    return *enc_fbank_;
  }

  static Matrix scatter_rows(const Matrix& g, const std::vector<Eigen::Index>& rows,
                             Eigen::Index total_rows) {
    Matrix out = Matrix::Zero(total_rows, g.cols());
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      out.row(rows[static_cast<size_t>(i)]) += g.row(i);
    return out;
  }

  void accumulate_layer_weight_grads(Cache& cache, const Matrix& g_h) {
    lw_.grad.col(0) +=
        weighted_layer_sum_backward(*cache.stack, layer_weights(), g_h);
  }

  void forward_to_embedding(const UttFeatures& feats, bool training, double dropout,
                            std::mt19937_64* rng, Cache& cache) {
    if (cfg_.uses_fbank()) {
      cache.fbank_in = feats.fbank;
      if (training && cfg_.use_specaug) {
        if (rng == nullptr) throw InvalidInputError("model: training forward needs an rng");
        cache.fbank_in = spec_augment(cache.fbank_in, cfg_.specaug, (*rng)());
      }
    }
    if (cfg_.uses_ssl()) {
      cache.stack = &feats.stack;
      if (feats.stack.layer_count() != cfg_.ssl_layers)
        throw InvalidInputError("model: stack has " +
                                std::to_string(feats.stack.layer_count()) +
                                " layers, config expects " + std::to_string(cfg_.ssl_layers));
      cache.h_ssl = weighted_layer_sum(feats.stack, layer_weights());
    }

    Matrix frames;
    switch (cfg_.mode) {
      case FusionMode::kMidLevel: {
        cache.align = align_frame_rates(cache.h_ssl, cache.fbank_in);
        cache.aligned = true;
        cache.frames_ssl =
            enc_ssl_->forward(cache.align.a.values, training, dropout, rng, cache.enc_ssl);
        cache.frames_fbank = enc_fbank_->forward(cache.align.b.values, training, dropout,
                                                 rng, cache.enc_fbank);
        cache.fused = fuse_mid(cache.frames_ssl, cache.frames_fbank);
        frames = cache.fused;
        break;
      }
      case FusionMode::kSslOnly:
        cache.frames_ssl =
            enc_ssl_->forward(cache.h_ssl.values, training, dropout, rng, cache.enc_ssl);
        frames = cache.frames_ssl;
        break;
      case FusionMode::kFbankOnly:
        cache.frames_fbank =
            enc_fbank_->forward(cache.fbank_in.values, training, dropout, rng,
                                cache.enc_fbank);
        frames = cache.frames_fbank;
        break;
      case FusionMode::kRawLevel: {
        cache.align = align_frame_rates(cache.h_ssl, cache.fbank_in);
        cache.aligned = true;
        const FeatureMatrix cat = fuse_raw(cache.align.a, cache.align.b);
        frames = enc_raw_->forward(cat.values, training, dropout, rng, cache.enc_raw);
        break;
      }
    }

    const Vector pooled = asp_.forward(frames, cache.asp);
    cache.pooled_row = pooled.transpose();
    cache.emb_row = proj_.forward(cache.pooled_row);
  }

  ModelConfig cfg_;
  uint64_t seed_;
  Tensor lw_;
  std::optional<EcapaEncoder> enc_ssl_, enc_fbank_, enc_raw_;
  AttentiveStatsPool asp_;
  Linear proj_;
  AamHead head_;
};

}  // namespace dsv
