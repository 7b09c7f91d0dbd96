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

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dsv/config.hpp"
#include "dsv/dataset.hpp"
#include "dsv/manifest.hpp"
#include "dsv/model.hpp"
#include "dsv/protocol.hpp"
#include "dsv/scoring.hpp"
#include "dsv/synth.hpp"
#include "dsv/train.hpp"
#include "dsv/transforms.hpp"

namespace fs = std::filesystem;
using dsv::json;

namespace {

std::string run_root() {
  const char* env = std::getenv("DSV_RUN_ROOT");
  return env != nullptr && *env != '\0' ? env : "runs";
}

void echo_config(const std::string& run_dir, const json& effective) {
  fs::create_directories(run_dir);
  std::ofstream f(fs::path(run_dir) / "config.echo");
  f << effective.dump(2) << "\n";
}

void write_train_log(const std::string& path, const std::vector<dsv::StepLog>& log) {
  std::ofstream f(path);
  for (const auto& s : log) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%lld\t%.17g\t%.17g\n",
                  static_cast<long long>(s.step), s.lr, s.loss);
    f << buf;
  }
}

struct StageOverrides {
  int epochs = 0;
  int batch = 0;
  int accum = 0;
  double lr = 0.0;
  double dropout = -1.0;

  void apply(dsv::StageConfig& cfg) const {
    if (epochs > 0) cfg.epochs = epochs;
    if (batch > 0) cfg.batch_size = batch;
    if (accum > 0) cfg.grad_accum = accum;
    if (lr > 0.0) cfg.base_lr = lr;
    if (dropout >= 0.0) cfg.dropout = dropout;
  }
};

dsv::FeatureCache build_cache(const dsv::Manifest& manifest, const dsv::ModelConfig& model,
                              const dsv::SslProvider* provider, int workers) {
  const bool need_ssl = model.uses_ssl();
  return dsv::FeatureCache::build(manifest, model.fbank, need_ssl ? provider : nullptr,
                                  model.uses_fbank() || true, need_ssl, workers);
}

dsv::EmbeddingStore extract_embeddings(const dsv::DualStreamModel& model,
                                       const dsv::Manifest& manifest,
                                       const dsv::FeatureCache& cache) {
  dsv::EmbeddingStore store;
  store.emb_dim = model.emb_dim();
  store.model_checksum = dsv::to_hex(model.full_checksum());
  for (const auto& e : manifest.entries)
    store.embeddings[e.utt_id] = model.embed(cache.at(e.utt_id));
  return store;
}

// ---- shared orchestration for the ablation/sweep commands -----------------

struct ExperimentAssets {
  dsv::ExperimentConfig cfg;
  std::unique_ptr<dsv::SslProvider> provider;
  dsv::Manifest eval_manifest;
  dsv::Protocol protocol;
  std::unique_ptr<dsv::FeatureCache> eval_cache;

  void load_eval(const std::string& eval_manifest_path, const std::string& trials_path,
                 const std::string& enroll_map_path, int workers) {
    eval_manifest = dsv::Manifest::read(eval_manifest_path);
    protocol.trials = dsv::read_trials(trials_path);
    protocol.enroll_map = dsv::read_enroll_map(enroll_map_path);
    eval_cache = std::make_unique<dsv::FeatureCache>(
        build_cache(eval_manifest, cfg.model, provider.get(), workers));
  }

  dsv::EvalReport evaluate(const dsv::DualStreamModel& model,
                           const std::string& scores_path = "") const {
    const auto store = extract_embeddings(model, eval_manifest, *eval_cache);
    return dsv::evaluate_protocol(store, protocol, scores_path);
  }
};

// ---- subcommand implementations --------------------------------------------

int cmd_synth(int speakers, int utts, const std::string& out, uint64_t seed, double min_dur,
              double max_dur) {
  dsv::SynthConfig cfg;
  if (min_dur > 0.0) cfg.utt_min_s = min_dur;
  if (max_dur > 0.0) cfg.utt_max_s = max_dur;
  const dsv::Manifest m = dsv::synth_corpus(speakers, utts, seed, out, cfg);
  std::cout << "synthesized " << m.entries.size() << " utterances from "
            << m.speakers().size() << " speakers into " << out << "\n";
  std::cout << "manifest: " << (fs::path(out) / "manifest.txt").string() << "\n";
  return 0;
}

int cmd_transform(const std::string& manifest_path, const std::string& out, uint64_t seed,
                  const std::vector<std::string>& only, bool with_heldout) {
  const dsv::Manifest src = dsv::Manifest::read(manifest_path);
  std::vector<dsv::TransformSpec> specs = dsv::default_transform_bank(seed);
  if (with_heldout) specs.push_back(dsv::default_heldout_transform(seed));
  if (!only.empty()) {
    std::vector<dsv::TransformSpec> filtered;
    for (const auto& s : specs)
      if (std::find(only.begin(), only.end(), s.transform_id) != only.end())
        filtered.push_back(s);
    if (filtered.empty()) throw dsv::InvalidConfigError("no transforms match --only");
    specs = filtered;
  }
  const dsv::Manifest m = dsv::transform_corpus(src, specs, out);

  json bank = json::array();
  for (const auto& s : specs)
    bank.push_back({{"transform_id", s.transform_id},
                    {"kind", dsv::to_string(s.kind)},
                    {"strength", s.strength},
                    {"seed", s.seed}});
  std::ofstream((fs::path(out) / "bank.json").string()) << bank.dump(2) << "\n";

  std::cout << "transformed " << src.entries.size() << " utterances with " << specs.size()
            << " systems -> " << m.entries.size() << " utterances in " << out << "\n";
  return 0;
}

int cmd_protocol(const std::string& manifest_path, int n_enroll, const std::string& out,
                 uint64_t seed) {
  const dsv::Manifest m = dsv::Manifest::read(manifest_path);
  const dsv::Protocol p = dsv::build_protocol(m, n_enroll, seed);
  fs::create_directories(out);
  dsv::write_trials((fs::path(out) / "trials.txt").string(), p.trials);
  dsv::write_enroll_map((fs::path(out) / "enroll_map.txt").string(), p.enroll_map);
  int targets = 0;
  for (const auto& t : p.trials) targets += t.target ? 1 : 0;
  std::cout << "protocol: " << p.trials.size() << " trials (" << targets << " target, "
            << p.trials.size() - targets << " nontarget), " << p.enroll_map.size()
            << " enrollment models\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& manifest_path,
              const std::string& stage_name, const std::string& out, double data_fraction,
              const std::string& resume, uint64_t seed_flag, bool seed_set,
              const StageOverrides& ov, int workers) {
  dsv::ExperimentConfig cfg =
      config_path.empty() ? dsv::ExperimentConfig{} : dsv::load_experiment_config(config_path);
  const uint64_t seed = seed_set ? seed_flag : cfg.seed;
  const dsv::Manifest manifest = dsv::Manifest::read(manifest_path);
  const auto stage = dsv::stage_from_string(stage_name);
  dsv::StageConfig stage_cfg = dsv::make_stage_config(stage, data_fraction);
  ov.apply(stage_cfg);

  auto provider = cfg.provider.create();
  const std::string run_dir = out.empty() ? run_root() + "/train_" + stage_name : out;
  const std::string ckpt_dir = (fs::path(run_dir) / "checkpoints").string();
  fs::create_directories(ckpt_dir);

  const int n_speakers = static_cast<int>(manifest.speakers().size());
  std::unique_ptr<dsv::DualStreamModel> model;
  dsv::Checkpoint ckpt;
  bool resumed_mid_stage = false;
  if (!resume.empty()) {
    ckpt = dsv::Checkpoint::load(resume);
    model = std::make_unique<dsv::DualStreamModel>(dsv::restore_model(ckpt, seed));
    if (model->n_classes() != n_speakers) {
      model->replace_head(n_speakers, dsv::mix_seed(seed, 0x4ead2));
      std::cout << "replaced classifier head: " << ckpt.model_config.n_classes << " -> "
                << n_speakers << " classes\n";
    } else if (ckpt.stage == stage_name && ckpt.epoch_in_stage > 0 &&
               ckpt.epoch_in_stage < stage_cfg.epochs) {
      resumed_mid_stage = true;
    }
  } else {
    dsv::ModelConfig mc = cfg.model;
    mc.n_classes = n_speakers;
    model = std::make_unique<dsv::DualStreamModel>(mc, seed);
  }

  json effective = to_json(cfg);
  effective["stage"] = to_json(stage_cfg);
  effective["manifest"] = manifest_path;
  effective["seed"] = seed;
  effective["resume"] = resume;
  echo_config(run_dir, effective);

  const dsv::FeatureCache cache = build_cache(manifest, cfg.model, provider.get(), workers);

  dsv::Trainer trainer(*model, provider.get(), seed);
  if (resumed_mid_stage) {
    trainer.restore(ckpt);
    std::cout << "resuming stage " << stage_name << " at epoch " << ckpt.epoch_in_stage
              << "\n";
  }
  dsv::TrainOptions opts;
  opts.checkpoint_dir = ckpt_dir;
  opts.log = &std::cout;
  trainer.run_stage(manifest, cache, stage_cfg, opts);
  trainer.save_checkpoint(ckpt_dir + "/final.ckpt", stage_cfg);
  write_train_log((fs::path(run_dir) / "train_log.tsv").string(), trainer.log());
  std::cout << "checkpoint: " << ckpt_dir << "/final.ckpt\n";
  return 0;
}

int cmd_extract(const std::string& config_path, const std::string& checkpoint,
                const std::string& manifest_path, const std::string& out, int workers) {
  dsv::ExperimentConfig cfg =
      config_path.empty() ? dsv::ExperimentConfig{} : dsv::load_experiment_config(config_path);
  const dsv::Checkpoint ckpt = dsv::Checkpoint::load(checkpoint);
  const dsv::DualStreamModel model = dsv::restore_model(ckpt);
  auto provider = cfg.provider.create();
  const dsv::Manifest manifest = dsv::Manifest::read(manifest_path);
  const dsv::FeatureCache cache =
      build_cache(manifest, ckpt.model_config, provider.get(), workers);
  dsv::EmbeddingStore store = extract_embeddings(model, manifest, cache);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  store.save(out);
  std::cout << "extracted " << store.embeddings.size() << " embeddings (dim "
            << store.emb_dim << ") to " << out << "\n";
  return 0;
}

int cmd_score(const std::string& embeddings, const std::string& trials_path,
              const std::string& enroll_map_path, const std::string& out) {
  const dsv::EmbeddingStore store = dsv::EmbeddingStore::load(embeddings);
  dsv::Protocol protocol;
  protocol.trials = dsv::read_trials(trials_path);
  protocol.enroll_map = dsv::read_enroll_map(enroll_map_path);
  const auto scores = dsv::score_trials(store, protocol);
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  dsv::write_scores(out, protocol, scores);
  std::cout << "scored " << scores.size() << " trials to " << out << "\n";
  return 0;
}

int cmd_evaluate(const std::string& scores_path, const std::string& trials_path,
                 const std::string& report_path) {
  const auto trials = dsv::read_trials(trials_path);
  std::ifstream f(scores_path);
  if (!f) throw dsv::IoError("cannot open scores: " + scores_path);
  std::vector<double> scores;
  std::string enroll, utt;
  double value = 0.0;
  size_t idx = 0;
  while (f >> enroll >> utt >> value) {
    if (idx >= trials.size())
      throw dsv::InvalidDataError("score file has more lines than the trial list");
    if (enroll != trials[idx].enroll_id || utt != trials[idx].test_utt_id)
      throw dsv::InvalidDataError("score line " + std::to_string(idx + 1) +
                                  " does not match the trial list");
    scores.push_back(value);
    ++idx;
  }
  if (scores.size() != trials.size())
    throw dsv::InvalidDataError("score file has fewer lines than the trial list");
  if (trials.empty()) throw dsv::InvalidDataError("empty trial list");

  const dsv::GenderEER g = dsv::gender_averaged_eer(trials, scores);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "EER female %.6f\nEER male %.6f\naveraged EER %.6f\n", g.female.eer,
                g.male.eer, g.average);
  std::cout << buf;
  if (!report_path.empty()) {
    dsv::EvalReport r;
    r.eer_female = g.female.eer;
    r.eer_male = g.male.eer;
    r.eer_avg = g.average;
    r.threshold_female = g.female.threshold;
    r.threshold_male = g.male.threshold;
    r.n_trials = static_cast<int>(trials.size());
    r.n_target = g.female.n_target + g.male.n_target;
    r.n_nontarget = g.female.n_nontarget + g.male.n_nontarget;
    if (fs::path(report_path).has_parent_path())
      fs::create_directories(fs::path(report_path).parent_path());
    std::ofstream rf(report_path);
    rf << r.to_json().dump(2) << "\n";
  }
  return 0;
}

int cmd_ablate_fusion(const std::string& config_path, const std::string& train_manifest,
                      const std::string& eval_manifest, const std::string& trials,
                      const std::string& enroll_map, const std::string& out,
                      uint64_t seed_flag, bool seed_set, const StageOverrides& ov,
                      int workers) {
  ExperimentAssets assets;
  assets.cfg =
      config_path.empty() ? dsv::ExperimentConfig{} : dsv::load_experiment_config(config_path);
  const uint64_t seed = seed_set ? seed_flag : assets.cfg.seed;
  assets.provider = assets.cfg.provider.create();

  const dsv::Manifest train = dsv::Manifest::read(train_manifest);
  const int classes = static_cast<int>(train.speakers().size());

  const std::string run_dir = out.empty() ? run_root() + "/ablate_fusion" : out;
  json effective = to_json(assets.cfg);
  effective["train_manifest"] = train_manifest;
  effective["seed"] = seed;
  echo_config(run_dir, effective);

  // the cache is shared by every mode; it carries both streams
  dsv::ModelConfig probe = assets.cfg.model;
  probe.mode = dsv::FusionMode::kMidLevel;
  const dsv::FeatureCache train_cache =
      dsv::FeatureCache::build(train, probe.fbank, assets.provider.get(), true, true, workers);
  dsv::ExperimentConfig eval_cfg = assets.cfg;
  eval_cfg.model.mode = dsv::FusionMode::kMidLevel;
  assets.cfg.model.mode = dsv::FusionMode::kMidLevel;
  assets.load_eval(eval_manifest, trials, enroll_map, workers);

  json grid = json::array();
  std::cout << "mode        eer_female  eer_male  eer_avg\n";
  for (const auto mode :
       {dsv::FusionMode::kFbankOnly, dsv::FusionMode::kSslOnly, dsv::FusionMode::kRawLevel,
        dsv::FusionMode::kMidLevel}) {
    dsv::ModelConfig mc = assets.cfg.model;
    mc.mode = mode;
    mc.n_classes = classes;
    dsv::DualStreamModel model(mc, seed);
    dsv::Trainer trainer(model, assets.provider.get(), seed);
    dsv::StageConfig cfg = dsv::make_stage_config(dsv::Stage::kIII, 1.0);
    ov.apply(cfg);
    trainer.run_stage(train, train_cache, cfg);
    const auto report = assets.evaluate(model);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-11s %.6f    %.6f  %.6f\n",
                  dsv::to_string(mode).c_str(), report.eer_female, report.eer_male,
                  report.eer_avg);
    std::cout << buf;
    json row = report.to_json();
    row["mode"] = dsv::to_string(mode);
    grid.push_back(row);
  }
  std::ofstream(fs::path(run_dir) / "report.json") << grid.dump(2) << "\n";
  return 0;
}

struct CurriculumAssets {
  ExperimentAssets base;
  dsv::Manifest m1, m2, m3;
  std::unique_ptr<dsv::FeatureCache> c1, c2, c3;

  void load(const std::string& config_path, const std::string& s1, const std::string& s2,
            const std::string& s3, const std::string& eval_manifest,
            const std::string& trials, const std::string& enroll_map, int workers) {
    base.cfg = config_path.empty() ? dsv::ExperimentConfig{}
                                   : dsv::load_experiment_config(config_path);
    base.provider = base.cfg.provider.create();
    m1 = dsv::Manifest::read(s1);
    m2 = dsv::Manifest::read(s2);
    m3 = dsv::Manifest::read(s3);
    c1 = std::make_unique<dsv::FeatureCache>(
        build_cache(m1, base.cfg.model, base.provider.get(), workers));
    c2 = std::make_unique<dsv::FeatureCache>(
        build_cache(m2, base.cfg.model, base.provider.get(), workers));
    c3 = std::make_unique<dsv::FeatureCache>(
        build_cache(m3, base.cfg.model, base.provider.get(), workers));
    base.load_eval(eval_manifest, trials, enroll_map, workers);
  }

  const dsv::Manifest& manifest(dsv::Stage s) const {
    return s == dsv::Stage::kI ? m1 : s == dsv::Stage::kII ? m2 : m3;
  }
  const dsv::FeatureCache& cache(dsv::Stage s) const {
    return s == dsv::Stage::kI ? *c1 : s == dsv::Stage::kII ? *c2 : *c3;
  }
};

dsv::EvalReport run_curriculum_row(const CurriculumAssets& assets,
                                   const std::vector<dsv::Stage>& stages, uint64_t seed,
                                   const StageOverrides& ov, double fraction_iii = 1.0) {
  dsv::ModelConfig mc = assets.base.cfg.model;
  mc.n_classes = static_cast<int>(assets.manifest(stages.front()).speakers().size());
  dsv::DualStreamModel model(mc, seed);
  dsv::Trainer trainer(model, assets.base.provider.get(), seed);
  std::vector<dsv::Trainer::StageRun> runs;
  for (const auto s : stages) {
    dsv::StageConfig cfg =
        dsv::make_stage_config(s, s == dsv::Stage::kIII ? fraction_iii : 1.0);
    ov.apply(cfg);
    runs.push_back({cfg, &assets.manifest(s), &assets.cache(s)});
  }
  trainer.run_curriculum(runs);
  return assets.base.evaluate(model);
}

std::string stages_label(const std::vector<dsv::Stage>& stages) {
  std::string out;
  for (const auto s : stages) {
    if (!out.empty()) out += "+";
    out += dsv::to_string(s);
  }
  return out;
}

int cmd_ablate_stages(const std::string& config_path, const std::string& s1,
                      const std::string& s2, const std::string& s3,
                      const std::string& eval_manifest, const std::string& trials,
                      const std::string& enroll_map, const std::string& out,
                      uint64_t seed_flag, bool seed_set, const StageOverrides& ov,
                      int workers) {
  CurriculumAssets assets;
  assets.load(config_path, s1, s2, s3, eval_manifest, trials, enroll_map, workers);
  const uint64_t seed = seed_set ? seed_flag : assets.base.cfg.seed;

  const std::string run_dir = out.empty() ? run_root() + "/ablate_stages" : out;
  json effective = to_json(assets.base.cfg);
  effective["seed"] = seed;
  echo_config(run_dir, effective);

  using dsv::Stage;
  const std::vector<std::vector<Stage>> rows = {
      {Stage::kI},           {Stage::kII},          {Stage::kIII},
      {Stage::kI, Stage::kII}, {Stage::kI, Stage::kIII},
      {Stage::kI, Stage::kII, Stage::kIII}};

  json grid = json::array();
  std::cout << "stages     eer_female  eer_male  eer_avg\n";
  for (const auto& row : rows) {
    const auto report = run_curriculum_row(assets, row, seed, ov);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-10s %.6f    %.6f  %.6f\n",
                  stages_label(row).c_str(), report.eer_female, report.eer_male,
                  report.eer_avg);
    std::cout << buf;
    json j = report.to_json();
    j["stages"] = stages_label(row);
    grid.push_back(j);
  }
  std::ofstream(fs::path(run_dir) / "report.json") << grid.dump(2) << "\n";
  return 0;
}

int cmd_sweep_fraction(const std::vector<double>& fractions, const std::string& config_path,
                       const std::string& s1, const std::string& s2, const std::string& s3,
                       const std::string& eval_manifest, const std::string& trials,
                       const std::string& enroll_map, const std::string& out,
                       uint64_t seed_flag, bool seed_set, const StageOverrides& ov,
                       int workers) {
  if (fractions.empty())
    throw dsv::InvalidConfigError("sweep-fraction: provide at least one fraction");
  CurriculumAssets assets;
  assets.load(config_path, s1, s2, s3, eval_manifest, trials, enroll_map, workers);
  const uint64_t seed = seed_set ? seed_flag : assets.base.cfg.seed;

  const std::string run_dir = out.empty() ? run_root() + "/sweep_fraction" : out;
  json effective = to_json(assets.base.cfg);
  effective["seed"] = seed;
  effective["fractions"] = fractions;
  echo_config(run_dir, effective);

  using dsv::Stage;
  json grid = json::array();
  std::cout << "fraction  full_curriculum_eer  stage3_only_eer\n";
  for (const double f : fractions) {
    const auto full =
        run_curriculum_row(assets, {Stage::kI, Stage::kII, Stage::kIII}, seed, ov, f);
    const auto third_only = run_curriculum_row(assets, {Stage::kIII}, seed, ov, f);
    char buf[120];
    std::snprintf(buf, sizeof(buf), "%-9.3f %.6f             %.6f\n", f, full.eer_avg,
                  third_only.eer_avg);
    std::cout << buf;
    grid.push_back({{"fraction", f},
                    {"full_curriculum", full.to_json()},
                    {"stage3_only", third_only.to_json()}});
  }
  std::ofstream(fs::path(run_dir) / "report.json") << grid.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-stream speaker-verification attack toolkit"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  int sp_speakers = 20, sp_utts = 10;
  std::string sp_out = "corpus";
  uint64_t sp_seed = 7;
  double sp_min = 0.0, sp_max = 0.0;
  synth->add_option("--speakers", sp_speakers, "number of speakers");
  synth->add_option("--utts", sp_utts, "utterances per speaker");
  synth->add_option("--out", sp_out, "output directory")->required();
  synth->add_option("--seed", sp_seed, "rng seed");
  synth->add_option("--min-dur", sp_min, "min utterance seconds");
  synth->add_option("--max-dur", sp_max, "max utterance seconds");

  // transform
  auto* transform = app.add_subcommand("transform", "apply identity transforms to a corpus");
  std::string tr_manifest, tr_out;
  uint64_t tr_seed = 7;
  std::vector<std::string> tr_only;
  bool tr_heldout = false;
  transform->add_option("--manifest", tr_manifest, "source manifest")->required();
  transform->add_option("--out", tr_out, "output directory")->required();
  transform->add_option("--seed", tr_seed, "rng seed");
  transform->add_option("--only", tr_only, "restrict to these transform ids")->delimiter(',');
  transform->add_flag("--with-heldout", tr_heldout, "include the held-out transform");

  // protocol
  auto* protocol = app.add_subcommand("protocol", "build a verification protocol");
  std::string pr_manifest, pr_out;
  int pr_enroll = 3;
  uint64_t pr_seed = 7;
  protocol->add_option("--manifest", pr_manifest, "manifest")->required();
  protocol->add_option("--enroll", pr_enroll, "enrollment utterances per speaker");
  protocol->add_option("--out", pr_out, "output directory")->required();
  protocol->add_option("--seed", pr_seed, "rng seed");

  auto add_overrides = [](CLI::App* cmd, StageOverrides& ov) {
    cmd->add_option("--epochs", ov.epochs, "override stage epochs");
    cmd->add_option("--batch", ov.batch, "override batch size");
    cmd->add_option("--accum", ov.accum, "override gradient accumulation");
    cmd->add_option("--lr", ov.lr, "override headline learning rate");
    cmd->add_option("--dropout", ov.dropout, "override dropout");
  };

  // train
  auto* train = app.add_subcommand("train", "train one curriculum stage");
  std::string t_config, t_manifest, t_stage, t_out, t_resume;
  double t_fraction = 1.0;
  uint64_t t_seed = 0;
  bool t_seed_set = false;
  StageOverrides t_ov;
  int t_workers = 2;
  train->add_option("--config", t_config, "experiment config json");
  train->add_option("--manifest", t_manifest, "training manifest")->required();
  train->add_option("--stage", t_stage, "curriculum stage I|II|III")->required();
  train->add_option("--out", t_out, "run directory");
  train->add_option("--data-fraction", t_fraction, "per-speaker sampling fraction");
  train->add_option("--resume", t_resume, "checkpoint to resume from");
  train->add_option("--seed", t_seed, "rng seed")->each([&](const std::string&) {
    t_seed_set = true;
  });
  train->add_option("--workers", t_workers, "feature extraction workers");
  add_overrides(train, t_ov);

  // extract
  auto* extract = app.add_subcommand("extract", "extract an embedding store");
  std::string e_config, e_ckpt, e_manifest, e_out;
  int e_workers = 2;
  extract->add_option("--config", e_config, "experiment config json");
  extract->add_option("--checkpoint", e_ckpt, "model checkpoint")->required();
  extract->add_option("--manifest", e_manifest, "manifest of utterances")->required();
  extract->add_option("--out", e_out, "output embedding store")->required();
  extract->add_option("--workers", e_workers, "feature extraction workers");

  // score
  auto* score = app.add_subcommand("score", "score trials against an embedding store");
  std::string sc_emb, sc_trials, sc_map, sc_out;
  score->add_option("--embeddings", sc_emb, "embedding store")->required();
  score->add_option("--trials", sc_trials, "trial list")->required();
  score->add_option("--enroll-map", sc_map, "enrollment map")->required();
  score->add_option("--out", sc_out, "output score file")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "compute gender-averaged EER");
  std::string ev_scores, ev_trials, ev_report;
  evaluate->add_option("--scores", ev_scores, "score file")->required();
  evaluate->add_option("--trials", ev_trials, "trial list")->required();
  evaluate->add_option("--report", ev_report, "machine-readable report path");

  // ablate-fusion
  auto* ab_fusion = app.add_subcommand("ablate-fusion", "fusion-strategy ablation grid");
  std::string af_config, af_train, af_eval, af_trials, af_map, af_out;
  uint64_t af_seed = 0;
  bool af_seed_set = false;
  StageOverrides af_ov;
  int af_workers = 2;
  ab_fusion->add_option("--config", af_config, "experiment config json");
  ab_fusion->add_option("--train-manifest", af_train, "training manifest")->required();
  ab_fusion->add_option("--eval-manifest", af_eval, "evaluation manifest")->required();
  ab_fusion->add_option("--trials", af_trials, "trial list")->required();
  ab_fusion->add_option("--enroll-map", af_map, "enrollment map")->required();
  ab_fusion->add_option("--out", af_out, "run directory");
  ab_fusion->add_option("--seed", af_seed, "rng seed")->each([&](const std::string&) {
    af_seed_set = true;
  });
  ab_fusion->add_option("--workers", af_workers, "feature extraction workers");
  add_overrides(ab_fusion, af_ov);

  auto add_curriculum_inputs = [](CLI::App* cmd, std::string& c, std::string& m1,
                                  std::string& m2, std::string& m3, std::string& ev,
                                  std::string& tr, std::string& mp, std::string& o) {
    cmd->add_option("--config", c, "experiment config json");
    cmd->add_option("--stage1-manifest", m1, "stage I manifest")->required();
    cmd->add_option("--stage2-manifest", m2, "stage II manifest")->required();
    cmd->add_option("--stage3-manifest", m3, "stage III manifest")->required();
    cmd->add_option("--eval-manifest", ev, "evaluation manifest")->required();
    cmd->add_option("--trials", tr, "trial list")->required();
    cmd->add_option("--enroll-map", mp, "enrollment map")->required();
    cmd->add_option("--out", o, "run directory");
  };

  // ablate-stages
  auto* ab_stages = app.add_subcommand("ablate-stages", "stage-combination ablation grid");
  std::string as_config, as_s1, as_s2, as_s3, as_eval, as_trials, as_map, as_out;
  uint64_t as_seed = 0;
  bool as_seed_set = false;
  StageOverrides as_ov;
  int as_workers = 2;
  add_curriculum_inputs(ab_stages, as_config, as_s1, as_s2, as_s3, as_eval, as_trials,
                        as_map, as_out);
  ab_stages->add_option("--seed", as_seed, "rng seed")->each([&](const std::string&) {
    as_seed_set = true;
  });
  ab_stages->add_option("--workers", as_workers, "feature extraction workers");
  add_overrides(ab_stages, as_ov);

  // sweep-fraction
  auto* sweep = app.add_subcommand("sweep-fraction", "low-resource adaptation sweep");
  std::vector<double> sw_fractions;
  std::string sw_config, sw_s1, sw_s2, sw_s3, sw_eval, sw_trials, sw_map, sw_out;
  uint64_t sw_seed = 0;
  bool sw_seed_set = false;
  StageOverrides sw_ov;
  int sw_workers = 2;
  sweep->add_option("fractions", sw_fractions, "per-speaker fractions to sweep")
      ->expected(-1);
  add_curriculum_inputs(sweep, sw_config, sw_s1, sw_s2, sw_s3, sw_eval, sw_trials, sw_map,
                        sw_out);
  sweep->add_option("--seed", sw_seed, "rng seed")->each([&](const std::string&) {
    sw_seed_set = true;
  });
  sweep->add_option("--workers", sw_workers, "feature extraction workers");
  add_overrides(sweep, sw_ov);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(sp_speakers, sp_utts, sp_out, sp_seed, sp_min, sp_max);
    if (transform->parsed())
      return cmd_transform(tr_manifest, tr_out, tr_seed, tr_only, tr_heldout);
    if (protocol->parsed()) return cmd_protocol(pr_manifest, pr_enroll, pr_out, pr_seed);
    if (train->parsed())
      return cmd_train(t_config, t_manifest, t_stage, t_out, t_fraction, t_resume, t_seed,
                       t_seed_set, t_ov, t_workers);
    if (extract->parsed()) return cmd_extract(e_config, e_ckpt, e_manifest, e_out, e_workers);
    if (score->parsed()) return cmd_score(sc_emb, sc_trials, sc_map, sc_out);
    if (evaluate->parsed()) return cmd_evaluate(ev_scores, ev_trials, ev_report);
    if (ab_fusion->parsed())
      return cmd_ablate_fusion(af_config, af_train, af_eval, af_trials, af_map, af_out,
                               af_seed, af_seed_set, af_ov, af_workers);
    if (ab_stages->parsed())
      return cmd_ablate_stages(as_config, as_s1, as_s2, as_s3, as_eval, as_trials, as_map,
                               as_out, as_seed, as_seed_set, as_ov, as_workers);
    if (sweep->parsed())
      return cmd_sweep_fraction(sw_fractions, sw_config, sw_s1, sw_s2, sw_s3, sw_eval,
                                sw_trials, sw_map, sw_out, sw_seed, sw_seed_set, sw_ov,
                                sw_workers);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
