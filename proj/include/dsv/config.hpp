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

#include <memory>
#include <string>

#include <json.hpp>

#include "dsv/model.hpp"
#include "dsv/ssl_provider.hpp"

namespace dsv {

using nlohmann::json;

// ---- feature configs -------------------------------------------------------

inline json to_json(const FbankConfig& c) {
  return {{"n_mels", c.n_mels},       {"window_ms", c.window_ms},
          {"hop_ms", c.hop_ms},       {"fft_size", c.fft_size},
          {"log_floor", c.log_floor}, {"preemphasis", c.preemphasis},
          {"low_freq_hz", c.low_freq_hz}, {"high_freq_hz", c.high_freq_hz}};
}

inline FbankConfig fbank_from_json(const json& j) {
  FbankConfig c;
  c.n_mels = j.value("n_mels", c.n_mels);
  c.window_ms = j.value("window_ms", c.window_ms);
  c.hop_ms = j.value("hop_ms", c.hop_ms);
  c.fft_size = j.value("fft_size", c.fft_size);
  c.log_floor = j.value("log_floor", c.log_floor);
  c.preemphasis = j.value("preemphasis", c.preemphasis);
  c.low_freq_hz = j.value("low_freq_hz", c.low_freq_hz);
  c.high_freq_hz = j.value("high_freq_hz", c.high_freq_hz);
  return c;
}

inline json to_json(const SpecAugConfig& c) {
  return {{"n_freq_masks", c.n_freq_masks},
          {"n_time_masks", c.n_time_masks},
          {"max_freq_width", c.max_freq_width},
          {"max_time_width", c.max_time_width},
          {"fill_mode", c.fill_mode == FillMode::kMean ? "mean" : "zero"}};
}

inline SpecAugConfig specaug_from_json(const json& j) {
  SpecAugConfig c;
  c.n_freq_masks = j.value("n_freq_masks", c.n_freq_masks);
  c.n_time_masks = j.value("n_time_masks", c.n_time_masks);
  c.max_freq_width = j.value("max_freq_width", c.max_freq_width);
  c.max_time_width = j.value("max_time_width", c.max_time_width);
  c.fill_mode = j.value("fill_mode", "zero") == std::string("mean") ? FillMode::kMean
                                                                    : FillMode::kZero;
  return c;
}

// ---- model -----------------------------------------------------------------

inline json to_json(const ModelConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"fbank", to_json(c.fbank)},
          {"ssl_layers", c.ssl_layers},
          {"ssl_dim", c.ssl_dim},
          {"layer_weight_softmax", c.layer_weight_softmax},
          {"channels", c.channels},
          {"n_blocks", c.n_blocks},
          {"dilations", c.dilations},
          {"res2_scale", c.res2_scale},
          {"se_bottleneck", c.se_bottleneck},
          {"stream_out_dim", c.stream_out_dim},
          {"stem_kernel", c.stem_kernel},
          {"block_kernel", c.block_kernel},
          {"asp_bottleneck", c.asp_bottleneck},
          {"asp_epsilon", c.asp_epsilon},
          {"emb_dim", c.emb_dim},
          {"aam_margin", c.aam.margin},
          {"aam_scale", c.aam.scale},
          {"n_classes", c.n_classes},
          {"specaug", to_json(c.specaug)},
          {"use_specaug", c.use_specaug}};
}

inline ModelConfig model_from_json(const json& j) {
  ModelConfig c;
  c.mode = fusion_mode_from_string(j.value("mode", to_string(c.mode)));
  if (j.contains("fbank")) c.fbank = fbank_from_json(j.at("fbank"));
  c.ssl_layers = j.value("ssl_layers", c.ssl_layers);
  c.ssl_dim = j.value("ssl_dim", c.ssl_dim);
  c.layer_weight_softmax = j.value("layer_weight_softmax", c.layer_weight_softmax);
  c.channels = j.value("channels", c.channels);
  c.n_blocks = j.value("n_blocks", c.n_blocks);
  c.dilations = j.value("dilations", c.dilations);
  c.res2_scale = j.value("res2_scale", c.res2_scale);
  c.se_bottleneck = j.value("se_bottleneck", c.se_bottleneck);
  c.stream_out_dim = j.value("stream_out_dim", c.stream_out_dim);
  c.stem_kernel = j.value("stem_kernel", c.stem_kernel);
  c.block_kernel = j.value("block_kernel", c.block_kernel);
  c.asp_bottleneck = j.value("asp_bottleneck", c.asp_bottleneck);
  c.asp_epsilon = j.value("asp_epsilon", c.asp_epsilon);
  c.emb_dim = j.value("emb_dim", c.emb_dim);
  c.aam.margin = j.value("aam_margin", c.aam.margin);
  c.aam.scale = j.value("aam_scale", c.aam.scale);
  c.n_classes = j.value("n_classes", c.n_classes);
  if (j.contains("specaug")) c.specaug = specaug_from_json(j.at("specaug"));
  c.use_specaug = j.value("use_specaug", c.use_specaug);
  return c;
}

// ---- SSL provider ----------------------------------------------------------

struct ProviderConfig {
  std::string type = "pseudo";  // "pseudo" | "file"
  PseudoSslConfig pseudo;
  FileStackConfig file;

  std::unique_ptr<SslProvider> create() const {
    if (type == "pseudo") return std::make_unique<PseudoSslProvider>(pseudo);
    if (type == "file") return std::make_unique<FileStackProvider>(file);
    throw InvalidConfigError("unknown provider type: " + type);
  }
};

inline json to_json(const ProviderConfig& c) {
  json j{{"type", c.type}};
  j["pseudo"] = {{"layers", c.pseudo.layers},       {"dim", c.pseudo.dim},
                 {"mel_bands", c.pseudo.mel_bands}, {"window_ms", c.pseudo.window_ms},
                 {"hop_ms", c.pseudo.hop_ms},       {"seed", c.pseudo.seed}};
  j["file"] = {{"dir", c.file.dir},
               {"layers", c.file.layers},
               {"dim", c.file.dim},
               {"frame_rate", c.file.frame_rate}};
  return j;
}

inline ProviderConfig provider_from_json(const json& j) {
  ProviderConfig c;
  c.type = j.value("type", c.type);
  if (j.contains("pseudo")) {
    const json& p = j.at("pseudo");
    c.pseudo.layers = p.value("layers", c.pseudo.layers);
    c.pseudo.dim = p.value("dim", c.pseudo.dim);
    c.pseudo.mel_bands = p.value("mel_bands", c.pseudo.mel_bands);
    c.pseudo.window_ms = p.value("window_ms", c.pseudo.window_ms);
    c.pseudo.hop_ms = p.value("hop_ms", c.pseudo.hop_ms);
    c.pseudo.seed = p.value("seed", c.pseudo.seed);
  }
  if (j.contains("file")) {
    const json& p = j.at("file");
    c.file.dir = p.value("dir", c.file.dir);
    c.file.layers = p.value("layers", c.file.layers);
    c.file.dim = p.value("dim", c.file.dim);
    c.file.frame_rate = p.value("frame_rate", c.file.frame_rate);
  }
  return c;
}

// The per-experiment declarative document. CLI flags override fields; the
// effective config is echoed into the run directory.
struct ExperimentConfig {
  uint64_t seed = 7;
  ModelConfig model;
  ProviderConfig provider;
};

inline json to_json(const ExperimentConfig& c) {
  return {{"seed", c.seed}, {"model", to_json(c.model)}, {"provider", to_json(c.provider)}};
}

inline ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("model")) c.model = model_from_json(j.at("model"));
  if (j.contains("provider")) c.provider = provider_from_json(j.at("provider"));
  return c;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config: " + path);
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) throw InvalidConfigError("unparsable config: " + path);
  return experiment_from_json(j);
}

}  // namespace dsv
