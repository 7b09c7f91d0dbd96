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

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/container.hpp"
#include "dsv/fbank.hpp"
#include "dsv/rng.hpp"
#include "dsv/wav_io.hpp"

namespace dsv {

// Per-utterance stack of hidden-state matrices, one per layer, all T x D.
struct LayerStack {
  std::vector<Matrix> layers;
  double frame_rate = 50.0;

  int layer_count() const { return static_cast<int>(layers.size()); }
  Eigen::Index frames() const { return layers.empty() ? 0 : layers.front().rows(); }
  Eigen::Index dim() const { return layers.empty() ? 0 : layers.front().cols(); }

  void validate() const {
    if (layers.empty()) throw InvalidInputError("layer stack is empty");
    for (const auto& l : layers)
      if (l.rows() != frames() || l.cols() != dim())
        throw InvalidInputError("layer stack shapes disagree");
  }
};

// Frozen feature source for the SSL stream. Implementations must be
// deterministic and immutable after construction; lookups are safe for
// concurrent readers.
class SslProvider {
 public:
  virtual ~SslProvider() = default;
  virtual LayerStack layer_stack(const Waveform& wav, const std::string& utt_id) const = 0;
  virtual int layer_count() const = 0;
  virtual int feature_dim() const = 0;
  virtual double frame_rate() const = 0;
  // Checksum over whatever internal parameters the provider holds; the
  // training loop asserts this never changes.
  virtual uint64_t params_checksum() const = 0;
};

inline LayerStack ssl_layer_stack(const Waveform& wav, const SslProvider& provider,
                                  const std::string& utt_id = "") {
  LayerStack s = provider.layer_stack(wav, utt_id);
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Built-in deterministic pseudo-SSL encoder: a frozen randomly-initialized
// stack of temporal nonlinear layers over a mel front end. Stands in for a
// real pretrained model so the full pipeline is testable offline.
// ---------------------------------------------------------------------------

struct PseudoSslConfig {
  int layers = 4;
  int dim = 32;
  int mel_bands = 32;
  double window_ms = 25.0;
  double hop_ms = 20.0;
  uint64_t seed = 0x5eed;
};

class PseudoSslProvider : public SslProvider {
 public:
  explicit PseudoSslProvider(const PseudoSslConfig& cfg) : cfg_(cfg) {
    if (cfg.layers < 1 || cfg.dim < 1 || cfg.mel_bands < 1)
      throw InvalidConfigError("pseudo-ssl: layers, dim, mel_bands must be >= 1");
    auto rng = make_rng(mix_seed(cfg.seed, 0x70533d));
    for (int l = 0; l < cfg.layers; ++l) {
      const int in_dim = l == 0 ? cfg.mel_bands : cfg.dim;
      const double scale = 1.0 / std::sqrt(3.0 * in_dim);
      left_.push_back(random_matrix(in_dim, cfg.dim, scale, rng));
      mid_.push_back(random_matrix(in_dim, cfg.dim, scale, rng));
      right_.push_back(random_matrix(in_dim, cfg.dim, scale, rng));
      bias_.push_back(random_matrix(1, cfg.dim, 0.1, rng));
    }
    uint64_t h = 0xcbf29ce484222325ull;
    for (int l = 0; l < cfg.layers; ++l) {
      h = dsv::checksum(left_[static_cast<size_t>(l)], h);
      h = dsv::checksum(mid_[static_cast<size_t>(l)], h);
      h = dsv::checksum(right_[static_cast<size_t>(l)], h);
      h = dsv::checksum(bias_[static_cast<size_t>(l)], h);
    }
    checksum_ = h;
  }

  LayerStack layer_stack(const Waveform& wav, const std::string&) const override {
    FbankConfig fb;
    fb.n_mels = cfg_.mel_bands;
    fb.window_ms = cfg_.window_ms;
    fb.hop_ms = cfg_.hop_ms;
    Matrix x = compute_fbank(wav, fb).values;
    // Per-utterance standardization keeps the tanh stack in range.
    const double mean = x.mean();
    const double sd = std::sqrt((x.array() - mean).square().mean());
    x = (x.array() - mean) / std::max(sd, 1e-6);

    LayerStack out;
    out.frame_rate = 1000.0 / cfg_.hop_ms;
    const Eigen::Index T = x.rows();
    for (int l = 0; l < cfg_.layers; ++l) {
      const auto li = static_cast<size_t>(l);
      Matrix pre = x * mid_[li];
      pre.topRows(T - 1) += x.bottomRows(T - 1) * right_[li];   // t+1 context
      pre.bottomRows(T - 1) += x.topRows(T - 1) * left_[li];    // t-1 context
      pre.rowwise() += bias_[li].row(0);
      x = pre.array().tanh();
      out.layers.push_back(x);
    }
    return out;
  }

  int layer_count() const override { return cfg_.layers; }
  int feature_dim() const override { return cfg_.dim; }
  double frame_rate() const override { return 1000.0 / cfg_.hop_ms; }
  uint64_t params_checksum() const override { return checksum_; }

 private:
  static Matrix random_matrix(int rows, int cols, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
    return m;
  }

  PseudoSslConfig cfg_;
  std::vector<Matrix> left_, mid_, right_, bias_;
  uint64_t checksum_ = 0;
};

// ---------------------------------------------------------------------------
// File-backed provider: one container file per utterance, precomputed by any
// external model. See docs/FORMATS.md for the layout.
// ---------------------------------------------------------------------------

inline std::string layer_name(int l) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "layer_%02d", l);
  return buf;
}

inline void save_layer_stack(const std::string& path, const std::string& utt_id,
                             const LayerStack& stack) {
  stack.validate();
  ArrayContainer c;
  c.meta["utt_id"] = utt_id;
  c.meta["L"] = stack.layer_count();
  c.meta["T"] = stack.frames();
  c.meta["D_ssl"] = stack.dim();
  c.meta["frame_rate"] = stack.frame_rate;
  for (int l = 0; l < stack.layer_count(); ++l)
    c.arrays[layer_name(l)] = stack.layers[static_cast<size_t>(l)];
  c.save(path);
}

inline LayerStack load_layer_stack(const std::string& path) {
  ArrayContainer c = ArrayContainer::load(path);
  const int L = c.meta.at("L").get<int>();
  if (L < 1) throw InvalidDataError("layer stack file with no layers: " + path);
  LayerStack out;
  out.frame_rate = c.meta.value("frame_rate", 50.0);
  for (int l = 0; l < L; ++l) {
    auto it = c.arrays.find(layer_name(l));
    if (it == c.arrays.end())
      throw InvalidDataError("layer stack file missing " + layer_name(l) + ": " + path);
    out.layers.push_back(it->second);
  }
  out.validate();
  if (out.frames() != c.meta.at("T").get<Eigen::Index>() ||
      out.dim() != c.meta.at("D_ssl").get<Eigen::Index>())
    throw InvalidDataError("layer stack metadata disagrees with arrays: " + path);
  return out;
}

struct FileStackConfig {
  std::string dir;
  int layers = 4;
  int dim = 32;
  double frame_rate = 50.0;
};

class FileStackProvider : public SslProvider {
 public:
  explicit FileStackProvider(const FileStackConfig& cfg) : cfg_(cfg) {
    if (cfg.layers < 1 || cfg.dim < 1)
      throw InvalidConfigError("file-stack provider: layers and dim must be >= 1");
  }

  LayerStack layer_stack(const Waveform&, const std::string& utt_id) const override {
    const auto path = stack_path(utt_id);
    if (!std::filesystem::exists(path))
      throw LookupError("no precomputed layer stack for utterance '" + utt_id + "' at " + path);
    LayerStack s = load_layer_stack(path);
    if (s.layer_count() != cfg_.layers || s.dim() != cfg_.dim)
      throw InvalidDataError("layer stack for '" + utt_id + "' has shape L=" +
                             std::to_string(s.layer_count()) + ",D=" + std::to_string(s.dim()) +
                             "; provider configured for L=" + std::to_string(cfg_.layers) +
                             ",D=" + std::to_string(cfg_.dim));
    return s;
  }

  std::string stack_path(const std::string& utt_id) const {
    return (std::filesystem::path(cfg_.dir) / (utt_id + ".stack")).string();
  }

  int layer_count() const override { return cfg_.layers; }
  int feature_dim() const override { return cfg_.dim; }
  double frame_rate() const override { return cfg_.frame_rate; }
  uint64_t params_checksum() const override { return 0; }

 private:
  FileStackConfig cfg_;
};

}  // namespace dsv
