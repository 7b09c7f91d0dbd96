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
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dsv/config.hpp"
#include "dsv/dataset.hpp"
#include "dsv/manifest.hpp"
#include "dsv/model.hpp"
#include "dsv/optim.hpp"
#include "dsv/rng.hpp"

namespace dsv {

enum class Stage { kI, kII, kIII };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::kI: return "I";
    case Stage::kII: return "II";
    case Stage::kIII: return "III";
  }
  return "?";
}

inline Stage stage_from_string(const std::string& s) {
  if (s == "I") return Stage::kI;
  if (s == "II") return Stage::kII;
  if (s == "III") return Stage::kIII;
  throw InvalidConfigError("unknown stage: " + s);
}

struct ClrConfig {
  double base_lr = 1e-5;   // cycle floor
  double max_lr = 0.0;     // 0: use the stage's headline lr
  int64_t step_size = 0;   // 0: half an epoch's optimizer steps
};

// Per-stage training recipe.
struct StageConfig {
  Stage stage = Stage::kI;
  double base_lr = 1e-3;
  ClrConfig schedule;
  OptimizerKind optimizer = OptimizerKind::kAdamW;
  int batch_size = 64;
  int grad_accum = 4;
  double dropout = 0.0;
  int epochs = 1;
  bool freeze_ssl = true;  // always true; the SSL provider is immutable
  double data_fraction = 1.0;
  double weight_decay = 0.0;

  void validate() const {
    if (data_fraction <= 0.0 || data_fraction > 1.0)
      throw InvalidConfigError("stage: data_fraction must be in (0, 1]");
    if (grad_accum < 1) throw InvalidConfigError("stage: grad_accum must be >= 1");
    if (batch_size < 1) throw InvalidConfigError("stage: batch_size must be >= 1");
    if (dropout < 0.0 || dropout > 1.0)
      throw InvalidConfigError("stage: dropout must be in [0, 1]");
    if (epochs < 1) throw InvalidConfigError("stage: epochs must be >= 1");
  }
};

// The published recipe per stage. Stage III epochs depend on the sampled
// fraction: 2 at 100%, 4 at 50%, 6 in low-resource settings.
inline StageConfig make_stage_config(Stage stage, double data_fraction = 1.0) {
  StageConfig cfg;
  cfg.stage = stage;
  switch (stage) {
    case Stage::kI:
      cfg.optimizer = OptimizerKind::kAdamW;
      cfg.batch_size = 64;
      cfg.grad_accum = 4;
      cfg.dropout = 0.0;
      cfg.epochs = 1;
      break;
    case Stage::kII:
      cfg.optimizer = OptimizerKind::kOrthogonalMomentum;
      cfg.batch_size = 64;
      cfg.grad_accum = 4;
      cfg.dropout = 0.3;
      cfg.epochs = 2;
      break;
    case Stage::kIII:
      cfg.optimizer = OptimizerKind::kAdamW;
      cfg.batch_size = 32;
      cfg.grad_accum = 1;
      cfg.dropout = 0.3;
      cfg.data_fraction = data_fraction;
      if (data_fraction >= 1.0)
        cfg.epochs = 2;
      else if (data_fraction >= 0.5)
        cfg.epochs = 4;
      else
        cfg.epochs = 6;
      break;
  }
  cfg.validate();
  return cfg;
}

inline json to_json(const StageConfig& c) {
  return {{"stage", to_string(c.stage)},
          {"base_lr", c.base_lr},
          {"clr_base_lr", c.schedule.base_lr},
          {"clr_max_lr", c.schedule.max_lr},
          {"clr_step_size", c.schedule.step_size},
          {"optimizer", to_string(c.optimizer)},
          {"batch_size", c.batch_size},
          {"grad_accum", c.grad_accum},
          {"dropout", c.dropout},
          {"epochs", c.epochs},
          {"data_fraction", c.data_fraction},
          {"weight_decay", c.weight_decay}};
}

inline StageConfig stage_from_json(const json& j) {
  StageConfig c;
  c.stage = stage_from_string(j.value("stage", "I"));
  c.base_lr = j.value("base_lr", c.base_lr);
  c.schedule.base_lr = j.value("clr_base_lr", c.schedule.base_lr);
  c.schedule.max_lr = j.value("clr_max_lr", c.schedule.max_lr);
  c.schedule.step_size = j.value("clr_step_size", c.schedule.step_size);
  c.optimizer = optimizer_kind_from_string(j.value("optimizer", "adamw"));
  c.batch_size = j.value("batch_size", c.batch_size);
  c.grad_accum = j.value("grad_accum", c.grad_accum);
  c.dropout = j.value("dropout", c.dropout);
  c.epochs = j.value("epochs", c.epochs);
  c.data_fraction = j.value("data_fraction", c.data_fraction);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  return c;
}

// Speaker-diversity-preserving subsampler: every speaker keeps
// max(1, round(fraction * n_utts)) utterances.
inline Manifest sample_per_speaker(const Manifest& manifest, double fraction, uint64_t seed) {
  if (manifest.entries.empty()) throw InvalidInputError("sample_per_speaker: empty manifest");
  if (fraction <= 0.0 || fraction > 1.0)
    throw InvalidConfigError("sample_per_speaker: fraction must be in (0, 1]");
  if (fraction == 1.0) return manifest;

  auto rng = make_rng(mix_seed(seed, 0x5a371e));
  std::vector<size_t> keep;
  for (const auto& [spk, idxs] : manifest.by_speaker()) {
    const auto count = std::max<size_t>(
        1, static_cast<size_t>(std::llround(fraction * static_cast<double>(idxs.size()))));
    std::vector<size_t> order = idxs;
    std::shuffle(order.begin(), order.end(), rng);
    keep.insert(keep.end(), order.begin(), order.begin() + static_cast<long>(count));
  }
  std::sort(keep.begin(), keep.end());
  Manifest out;
  out.base_dir = manifest.base_dir;
  for (size_t i : keep) out.entries.push_back(manifest.entries[i]);
  return out;
}

struct StepLog {
  int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainOptions {
  std::string checkpoint_dir;  // empty: no checkpoints written
  std::ostream* log = nullptr;
};

// ---------------------------------------------------------------------------
// Checkpoint container.
// ---------------------------------------------------------------------------

struct Checkpoint {
  static constexpr int kVersion = 1;
  ModelConfig model_config;
  std::map<std::string, Matrix> params;
  std::map<std::string, Matrix> opt_state;
  int64_t opt_step = 0;
  int64_t global_step = 0;
  int epoch_in_stage = 0;
  std::string stage = "I";
  std::string rng_state;
  uint64_t sampler_seed = 0;
  json stage_config;

  void save(const std::string& path) const {
    ArrayContainer c;
    c.meta["version"] = kVersion;
    c.meta["kind"] = "checkpoint";
    c.meta["model_config"] = to_json(model_config);
    c.meta["opt_step"] = opt_step;
    c.meta["global_step"] = global_step;
    c.meta["epoch_in_stage"] = epoch_in_stage;
    c.meta["stage"] = stage;
    c.meta["rng_state"] = rng_state;
    c.meta["sampler_seed"] = sampler_seed;
    c.meta["stage_config"] = stage_config;
    for (const auto& [name, m] : params) c.arrays["param." + name] = m;
    for (const auto& [name, m] : opt_state) c.arrays[name] = m;
    c.save(path);
  }

  static Checkpoint load(const std::string& path) {
    ArrayContainer c = ArrayContainer::load(path);
    if (c.meta.value("version", -1) != kVersion)
      throw IoError("unsupported checkpoint version " +
                    std::to_string(c.meta.value("version", -1)) + " in " + path +
                    " (this build reads version " + std::to_string(kVersion) + ")");
    Checkpoint out;
    out.model_config = model_from_json(c.meta.at("model_config"));
    out.opt_step = c.meta.value("opt_step", 0);
    out.global_step = c.meta.value("global_step", 0);
    out.epoch_in_stage = c.meta.value("epoch_in_stage", 0);
    out.stage = c.meta.value("stage", "I");
    out.rng_state = c.meta.value("rng_state", "");
    out.sampler_seed = c.meta.value("sampler_seed", uint64_t{0});
    out.stage_config = c.meta.value("stage_config", json::object());
    for (const auto& [name, m] : c.arrays) {
      if (name.rfind("param.", 0) == 0)
        out.params[name.substr(6)] = m;
      else
        out.opt_state[name] = m;
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Trainer: runs stages and curricula over a model, owning the optimizer, the
// step counters and the training rng. The SSL provider never trains; its
// checksum is asserted around every stage.
// ---------------------------------------------------------------------------

class Trainer {
 public:
  Trainer(DualStreamModel& model, const SslProvider* provider, uint64_t seed)
      : model_(model), provider_(provider), rng_(make_rng(mix_seed(seed, 0x7124))) {}

  const std::vector<StepLog>& log() const { return log_; }
  int head_replacements() const { return head_replacements_; }
  int64_t global_step() const { return global_step_; }

  void run_stage(const Manifest& manifest, const FeatureCache& cache, const StageConfig& cfg,
                 const TrainOptions& opts = {}) {
    cfg.validate();
    const uint64_t provider_sum = provider_ ? provider_->params_checksum() : 0;

    // The sampler seed is drawn once per stage entry and checkpointed, so a
    // resumed stage sees the same subset.
    if (epoch_in_stage_ == 0) sampler_seed_ = rng_();

    Manifest data = manifest;
    if (cfg.data_fraction < 1.0) {
      data = sample_per_speaker(manifest, cfg.data_fraction, sampler_seed_);
      if (opts.log)
        *opts.log << "stage " << to_string(cfg.stage) << ": sampler kept "
                  << data.speakers().size() << " of " << manifest.speakers().size()
                  << " speakers, " << data.entries.size() << " of "
                  << manifest.entries.size() << " utterances (fraction "
                  << cfg.data_fraction << ")\n";
    }
    if (data.entries.empty()) throw InvalidDataError("train: empty stage manifest");

    const auto labels = speaker_labels(data);
    for (const auto& [spk, label] : labels)
      if (label >= model_.n_classes())
        throw InvalidDataError("train: label " + std::to_string(label) + " for speaker " +
                               spk + " >= head size " +
                               std::to_string(model_.n_classes()));

    const auto n = data.entries.size();
    const auto group = static_cast<size_t>(cfg.batch_size) *
                       static_cast<size_t>(cfg.grad_accum);
    const auto steps_per_epoch = static_cast<int64_t>((n + group - 1) / group);
    const int64_t step_size = cfg.schedule.step_size > 0
                                  ? cfg.schedule.step_size
                                  : std::max<int64_t>(1, steps_per_epoch / 2);
    const double max_lr = cfg.schedule.max_lr > 0.0 ? cfg.schedule.max_lr : cfg.base_lr;
    const double base_lr = std::min(cfg.schedule.base_lr, max_lr);

    // Fresh optimizer and schedule position per stage; a mid-stage resume
    // keeps the restored state instead.
    if (epoch_in_stage_ == 0 || !optimizer_) {
      OptimizerConfig ocfg;
      ocfg.kind = cfg.optimizer;
      ocfg.weight_decay = cfg.weight_decay;
      optimizer_.emplace(ocfg);
      stage_step_ = 0;
    }

    ParamRefs refs;
    model_.collect(refs);

    std::vector<size_t> order(n);
    for (int epoch = epoch_in_stage_; epoch < cfg.epochs; ++epoch) {
      // shuffle starts from the identity every epoch so that a resumed run
      // reproduces the same order from the restored rng alone
      for (size_t i = 0; i < n; ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng_);
      for (size_t start = 0; start < n; start += group) {
        const size_t end = std::min(n, start + group);
        model_.zero_grads();
        double loss_acc = 0.0;
        for (size_t i = start; i < end; ++i) {
          const auto& entry = data.entries[order[i]];
          DualStreamModel::Cache fwd;
          const double loss =
              model_.forward_loss(cache.at(entry.utt_id), labels.at(entry.speaker_id), true,
                                  cfg.dropout, &rng_, fwd);
          if (!std::isfinite(loss))
            throw TrainingError("non-finite loss at step " + std::to_string(global_step_));
          model_.backward(fwd);
          loss_acc += loss;
        }
        const auto count = static_cast<double>(end - start);
        for (Tensor* t : refs) t->grad /= count;
        const double lr = clr_lr(stage_step_, base_lr, max_lr, step_size);
        try {
          optimizer_->step(refs, lr);
        } catch (const TrainingError& e) {
          throw TrainingError(std::string(e.what()) + " at step " +
                              std::to_string(global_step_));
        }
        log_.push_back({global_step_, lr, loss_acc / count});
        if (opts.log)
          *opts.log << "step " << global_step_ << " lr " << lr << " loss "
                    << loss_acc / count << "\n";
        ++global_step_;
        ++stage_step_;
      }
      epoch_in_stage_ = epoch + 1;
      if (!opts.checkpoint_dir.empty())
        save_checkpoint(opts.checkpoint_dir + "/stage" + to_string(cfg.stage) + "_epoch" +
                            std::to_string(epoch + 1) + ".ckpt",
                        cfg);
    }
    epoch_in_stage_ = 0;

    const uint64_t provider_sum_after = provider_ ? provider_->params_checksum() : 0;
    if (provider_sum != provider_sum_after)
      throw TrainingError("SSL provider parameters changed during a stage");
  }

  struct StageRun {
    StageConfig config;
    const Manifest* manifest = nullptr;
    const FeatureCache* cache = nullptr;
  };

  // Runs stages in order; whenever a stage's speaker count differs from the
  // current head, the classifier head is replaced (backbone untouched).
  void run_curriculum(const std::vector<StageRun>& stages, const TrainOptions& opts = {}) {
    for (size_t i = 0; i < stages.size(); ++i) {
      const auto& run = stages[i];
      const int classes = static_cast<int>(run.manifest->speakers().size());
      if (classes != model_.n_classes()) {
        model_.replace_head(classes, rng_());
        ++head_replacements_;
        if (opts.log)
          *opts.log << "stage " << to_string(run.config.stage)
                    << ": replaced classifier head with " << classes << " classes\n";
      }
      run_stage(*run.manifest, *run.cache, run.config, opts);
      if (!opts.checkpoint_dir.empty())
        save_checkpoint(opts.checkpoint_dir + "/after_stage" +
                            to_string(run.config.stage) + ".ckpt",
                        run.config);
    }
  }

  void save_checkpoint(const std::string& path, const StageConfig& cfg) const {
    Checkpoint ckpt;
    ckpt.model_config = model_.config();
    ckpt.model_config.n_classes = model_.n_classes();
    ckpt.params = model_.param_arrays();
    if (optimizer_) {
      ckpt.opt_state = optimizer_->state_arrays();
      ckpt.opt_step = optimizer_->step_count();
    }
    ckpt.global_step = global_step_;
    ckpt.epoch_in_stage = epoch_in_stage_;
    ckpt.stage = to_string(cfg.stage);
    ckpt.rng_state = rng_state_to_string(rng_);
    ckpt.sampler_seed = sampler_seed_;
    ckpt.stage_config = to_json(cfg);
    ckpt.save(path);
  }

  // Restores counters, optimizer state and rng from a checkpoint. The model
  // itself must already carry the checkpoint's parameters.
  void restore(const Checkpoint& ckpt) {
    const StageConfig cfg = stage_from_json(ckpt.stage_config);
    OptimizerConfig ocfg;
    ocfg.kind = cfg.optimizer;
    ocfg.weight_decay = cfg.weight_decay;
    optimizer_.emplace(ocfg);
    optimizer_->load_state_arrays(ckpt.opt_state, ckpt.opt_step);
    global_step_ = ckpt.global_step;
    stage_step_ = ckpt.opt_step;
    epoch_in_stage_ = ckpt.epoch_in_stage;
    sampler_seed_ = ckpt.sampler_seed;
    if (!ckpt.rng_state.empty()) rng_ = rng_state_from_string(ckpt.rng_state);
  }

 private:
  DualStreamModel& model_;
  const SslProvider* provider_;
  std::mt19937_64 rng_;
  std::optional<Optimizer> optimizer_;
  uint64_t sampler_seed_ = 0;
  int64_t global_step_ = 0;
  int64_t stage_step_ = 0;
  int epoch_in_stage_ = 0;
  std::vector<StepLog> log_;
  int head_replacements_ = 0;
};

// Convenience: model construction from a checkpoint.
inline DualStreamModel restore_model(const Checkpoint& ckpt, uint64_t seed = 0) {
  DualStreamModel model(ckpt.model_config, seed);
  model.load_param_arrays(ckpt.params);
  return model;
}

}  // namespace dsv
