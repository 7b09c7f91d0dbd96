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
#include <string>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/nn.hpp"
#include "dsv/rng.hpp"

namespace dsv {

// Frame-level TDNN encoder: stem conv, SE-Res2 dilated blocks with residual
// skips, and multi-layer aggregation of the block outputs through a 1x1
// projection. Time length is preserved throughout (same padding).
struct EncoderConfig {
  int in_dim = 80;
  int channels = 1024;
  int n_blocks = 3;
  std::vector<int> dilations = {2, 3, 4};
  int res2_scale = 4;
  int se_bottleneck = 0;  // 0: channels / 4 (at least 1)
  int out_dim = 0;        // 0: channels
  int stem_kernel = 5;
  int block_kernel = 3;
  double dropout = 0.0;

  int effective_se_bottleneck() const {
    return se_bottleneck > 0 ? se_bottleneck : std::max(1, channels / 4);
  }
  int effective_out_dim() const { return out_dim > 0 ? out_dim : channels; }

  void validate() const {
    if (in_dim < 1 || channels < 1 || n_blocks < 1)
      throw InvalidConfigError("encoder: in_dim, channels, n_blocks must be >= 1");
    if (res2_scale < 2) throw InvalidConfigError("encoder: res2_scale must be >= 2");
    if (channels % res2_scale != 0)
      throw InvalidConfigError("encoder: channels (" + std::to_string(channels) +
                               ") not divisible by res2_scale (" +
                               std::to_string(res2_scale) + ")");
    if (dilations.empty()) throw InvalidConfigError("encoder: dilations empty");
    if (dropout < 0.0 || dropout > 1.0)
      throw InvalidConfigError("encoder: dropout outside [0, 1]");
  }
};

// Copyable snapshot of one encoder's parameters, keyed by tensor name.
using EncoderParams = std::map<std::string, Matrix>;

class EcapaEncoder {
 public:
  struct BlockCache {
    Matrix input;
    Matrix a_out;
    std::vector<Matrix> branch_in;
    std::vector<Matrix> branch_out;
    Matrix res2_out;
    Matrix b_out;
    Matrix se_mean;    // 1 x C
    Matrix se_hidden;  // 1 x bottleneck
    Matrix se_gate;    // 1 x C, in (0,1)
    Matrix block_out;  // pre-dropout
    Matrix drop_mask;  // empty when dropout inactive
  };
  struct Cache {
    Matrix input;
    Matrix stem_out;
    std::vector<BlockCache> blocks;
    Matrix concat;
    Matrix out;
  };

  EcapaEncoder(const EncoderConfig& cfg, uint64_t seed, std::string prefix = "enc")
      : cfg_(cfg), prefix_(std::move(prefix)) {
    cfg_.validate();
    auto rng = make_rng(mix_seed(seed, fnv1a(prefix_.data(), prefix_.size())));
    const int C = cfg_.channels;
    const int w = C / cfg_.res2_scale;
    stem_ = Conv1d(prefix_ + ".stem", cfg_.in_dim, C, cfg_.stem_kernel, 1, rng);
    for (int i = 0; i < cfg_.n_blocks; ++i) {
      Block b;
      const std::string bp = prefix_ + ".block" + std::to_string(i);
      const int dil = cfg_.dilations[static_cast<size_t>(i) % cfg_.dilations.size()];
      b.conv_a = Conv1d(bp + ".conv_a", C, C, 1, 1, rng);
      for (int j = 1; j < cfg_.res2_scale; ++j)
        b.branches.emplace_back(bp + ".res2_" + std::to_string(j), w, w, cfg_.block_kernel,
                                dil, rng);
      b.conv_b = Conv1d(bp + ".conv_b", C, C, 1, 1, rng);
      b.se_fc1 = Linear(bp + ".se_fc1", C, cfg_.effective_se_bottleneck(), rng);
      b.se_fc2 = Linear(bp + ".se_fc2", cfg_.effective_se_bottleneck(), C, rng);
      blocks_.push_back(std::move(b));
    }
    mfa_ = Linear(prefix_ + ".mfa", cfg_.n_blocks * C, cfg_.effective_out_dim(), rng);
  }

  const EncoderConfig& config() const { return cfg_; }
  int out_dim() const { return cfg_.effective_out_dim(); }

  Matrix forward(const Matrix& x, bool training, double dropout_p, std::mt19937_64* rng,
                 Cache& cache) const {
    if (x.cols() != cfg_.in_dim)
      throw InvalidInputError("encoder: input dim " + std::to_string(x.cols()) +
                              " != configured in_dim " + std::to_string(cfg_.in_dim));
    if (x.rows() < 1) throw InvalidInputError("encoder: empty input");
    const bool use_dropout = training && dropout_p > 0.0;
    if (use_dropout && rng == nullptr)
      throw InvalidInputError("encoder: dropout requires an rng");

    const Eigen::Index T = x.rows();
    const int C = cfg_.channels;
    const int s = cfg_.res2_scale;
    const int w = C / s;

    cache.input = x;
    cache.stem_out = relu(stem_.forward(x));
    cache.blocks.clear();
    cache.blocks.reserve(static_cast<size_t>(cfg_.n_blocks));

    Matrix h = cache.stem_out;
    cache.concat.resize(T, static_cast<Eigen::Index>(cfg_.n_blocks) * C);
    for (int i = 0; i < cfg_.n_blocks; ++i) {
      const Block& blk = blocks_[static_cast<size_t>(i)];
      BlockCache bc;
      bc.input = h;
      bc.a_out = relu(blk.conv_a.forward(h));

      bc.res2_out.resize(T, C);
      bc.res2_out.leftCols(w) = bc.a_out.leftCols(w);
      Matrix prev = bc.a_out.leftCols(w);
      for (int j = 1; j < s; ++j) {
        Matrix in_j = bc.a_out.middleCols(static_cast<Eigen::Index>(j) * w, w) + prev;
        Matrix out_j = relu(blk.branches[static_cast<size_t>(j) - 1].forward(in_j));
        bc.res2_out.middleCols(static_cast<Eigen::Index>(j) * w, w) = out_j;
        bc.branch_in.push_back(std::move(in_j));
        prev = out_j;
        bc.branch_out.push_back(std::move(out_j));
      }

      bc.b_out = relu(blk.conv_b.forward(bc.res2_out));
      bc.se_mean = bc.b_out.colwise().mean();
      bc.se_hidden = relu(blk.se_fc1.forward(bc.se_mean));
      bc.se_gate = sigmoid(blk.se_fc2.forward(bc.se_hidden));
      Matrix scaled = bc.b_out * bc.se_gate.row(0).asDiagonal();
      bc.block_out = scaled + bc.input;

      h = bc.block_out;
      if (use_dropout) {
        bc.drop_mask = dropout_mask(T, C, dropout_p, *rng);
        h = h.cwiseProduct(bc.drop_mask);
      }
      cache.concat.middleCols(static_cast<Eigen::Index>(i) * C, C) = h;
      cache.blocks.push_back(std::move(bc));
    }
    cache.out = relu(mfa_.forward(cache.concat));
    return cache.out;
  }

  // Accumulates parameter grads; returns the gradient w.r.t. the input.
  Matrix backward(const Cache& cache, const Matrix& grad_out) {
    const Eigen::Index T = cache.input.rows();
    const int C = cfg_.channels;
    const int s = cfg_.res2_scale;
    const int w = C / s;

    Matrix g = relu_backward(cache.out, grad_out);
    Matrix gcat = mfa_.backward(cache.concat, g);

    Matrix gh = Matrix::Zero(T, C);  // grad reaching the next block's input
    for (int i = cfg_.n_blocks - 1; i >= 0; --i) {
      Block& blk = blocks_[static_cast<size_t>(i)];
      const BlockCache& bc = cache.blocks[static_cast<size_t>(i)];
      Matrix go = gcat.middleCols(static_cast<Eigen::Index>(i) * C, C) + gh;
      if (bc.drop_mask.size() > 0) go = go.cwiseProduct(bc.drop_mask);

      // residual: block_out = scaled + input
      Matrix g_scaled = go;
      Matrix g_input = go;

      // SE gating: scaled = b_out .* gate (gate broadcast over frames)
      Matrix g_bout = g_scaled * bc.se_gate.row(0).asDiagonal();
      Matrix g_gate = (g_scaled.array() * bc.b_out.array()).colwise().sum().matrix();
      Matrix g_pre2 = sigmoid_backward(bc.se_gate, g_gate);
      Matrix g_hidden = blk.se_fc2.backward(bc.se_hidden, g_pre2);
      g_hidden = relu_backward(bc.se_hidden, g_hidden);
      Matrix g_mean = blk.se_fc1.backward(bc.se_mean, g_hidden);
      g_bout.noalias() += (Matrix::Ones(T, 1) / static_cast<double>(T)) * g_mean;

      Matrix g_res2 = blk.conv_b.backward(bc.res2_out, relu_backward(bc.b_out, g_bout));

      // Res2 chain, last branch first; each branch input feeds the next one.
      Matrix g_a = Matrix::Zero(T, C);
      Matrix carry = Matrix::Zero(T, w);
      for (int j = s - 1; j >= 1; --j) {
        Matrix gy = g_res2.middleCols(static_cast<Eigen::Index>(j) * w, w) + carry;
        Matrix gpre = relu_backward(bc.branch_out[static_cast<size_t>(j) - 1], gy);
        Matrix gin = blk.branches[static_cast<size_t>(j) - 1].backward(
            bc.branch_in[static_cast<size_t>(j) - 1], gpre);
        g_a.middleCols(static_cast<Eigen::Index>(j) * w, w) = gin;
        carry = std::move(gin);
      }
      g_a.leftCols(w) += g_res2.leftCols(w) + carry;

      Matrix g_apre = relu_backward(bc.a_out, g_a);
      gh = blk.conv_a.backward(bc.input, g_apre) + g_input;
    }

    Matrix g_stem = relu_backward(cache.stem_out, gh);
    return stem_.backward(cache.input, g_stem);
  }

  void collect(ParamRefs& out) {
    stem_.collect(out);
    for (auto& b : blocks_) {
      b.conv_a.collect(out);
      for (auto& br : b.branches) br.collect(out);
      b.conv_b.collect(out);
      b.se_fc1.collect(out);
      b.se_fc2.collect(out);
    }
    mfa_.collect(out);
  }

  EncoderParams params() const {
    EncoderParams out;
    auto* self = const_cast<EcapaEncoder*>(this);
    ParamRefs refs;
    self->collect(refs);
    for (const Tensor* t : refs) out[t->name] = t->value;
    return out;
  }

  void set_params(const EncoderParams& p) {
    ParamRefs refs;
    collect(refs);
    if (p.size() != refs.size())
      throw InvalidInputError("encoder: parameter set has wrong tensor count");
    for (Tensor* t : refs) {
      auto it = p.find(t->name);
      if (it == p.end()) throw InvalidInputError("encoder: missing parameter " + t->name);
      if (it->second.rows() != t->value.rows() || it->second.cols() != t->value.cols())
        throw InvalidInputError("encoder: shape mismatch for " + t->name);
      t->value = it->second;
    }
  }

  // Copies parameter VALUES from another encoder laid out identically,
  // ignoring the name prefix. Used to swap stream parameter sets.
  void set_params_from(const EcapaEncoder& other) {
    ParamRefs mine, theirs;
    collect(mine);
    auto* o = const_cast<EcapaEncoder*>(&other);
    o->collect(theirs);
    if (mine.size() != theirs.size())
      throw InvalidInputError("encoder: incompatible parameter layouts");
    for (size_t i = 0; i < mine.size(); ++i) {
      if (mine[i]->value.rows() != theirs[i]->value.rows() ||
          mine[i]->value.cols() != theirs[i]->value.cols())
        throw InvalidInputError("encoder: incompatible shapes at " + mine[i]->name);
      mine[i]->value = theirs[i]->value;
    }
  }

 private:
  struct Block {
    Conv1d conv_a;
    std::vector<Conv1d> branches;
    Conv1d conv_b;
    Linear se_fc1, se_fc2;
  };

  EncoderConfig cfg_;
  std::string prefix_;
  Conv1d stem_;
  std::vector<Block> blocks_;
  Linear mfa_;
};

}  // namespace dsv
