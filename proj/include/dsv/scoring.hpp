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
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsv/common.hpp"
#include "dsv/container.hpp"
#include "dsv/heads.hpp"
#include "dsv/protocol.hpp"

namespace dsv {

// Arithmetic mean of the enrollment embeddings; cosine scoring is scale
// invariant, so no renormalization is applied before averaging by default.
inline SpeakerEmbedding enrollment_model(const std::vector<SpeakerEmbedding>& embs,
                                         bool normalize_before_average = false) {
  if (embs.empty()) throw InvalidInputError("enrollment_model: empty embedding list");
  const auto dim = embs.front().vector.size();
  Vector acc = Vector::Zero(dim);
  for (const auto& e : embs) {
    if (e.vector.size() != dim)
      throw InvalidInputError("enrollment_model: embedding dims disagree");
    if (normalize_before_average) {
      const double n = e.vector.norm();
      if (n < 1e-12) throw NumericDomainError("enrollment_model: zero-norm embedding");
      acc += e.vector / n;
    } else {
      acc += e.vector;
    }
  }
  SpeakerEmbedding out;
  out.vector = acc / static_cast<double>(embs.size());
  out.utt_id = embs.front().utt_id;
  return out;
}

inline double cosine_score(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw InvalidInputError("cosine_score: dim mismatch");
  const double na = a.norm(), nb = b.norm();
  if (na < 1e-12 || nb < 1e-12) throw NumericDomainError("cosine_score: zero-norm vector");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

inline double cosine_score(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
  return cosine_score(a.vector, b.vector);
}

struct EERResult {
  double eer = 0.0;
  double threshold = 0.0;
  int n_target = 0;
  int n_nontarget = 0;
};

// Interpolated EER at the FAR = FRR crossing. Scores equal to the threshold
// count as acceptances. FAR/FRR step functions are evaluated at every
// distinct score; the crossing is found by linear interpolation between
// adjacent points, and an exact-equality plateau reports its midpoint
// threshold.
inline EERResult compute_eer(std::vector<double> target_scores,
                             std::vector<double> nontarget_scores) {
  if (target_scores.empty() || nontarget_scores.empty())
    throw InvalidInputError("compute_eer: need at least one score per class");
  const auto n_t = static_cast<double>(target_scores.size());
  const auto n_nt = static_cast<double>(nontarget_scores.size());
  std::sort(target_scores.begin(), target_scores.end());
  std::sort(nontarget_scores.begin(), nontarget_scores.end());

  std::vector<double> thresholds;
  thresholds.reserve(target_scores.size() + nontarget_scores.size() + 2);
  const double lo = std::min(target_scores.front(), nontarget_scores.front());
  const double hi = std::max(target_scores.back(), nontarget_scores.back());
  thresholds.push_back(lo - 1.0);
  for (double s : target_scores) thresholds.push_back(s);
  for (double s : nontarget_scores) thresholds.push_back(s);
  thresholds.push_back(hi + 1.0);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  auto far_at = [&](double tau) {
    // acceptances among nontargets: scores >= tau
    const auto it =
        std::lower_bound(nontarget_scores.begin(), nontarget_scores.end(), tau);
    return static_cast<double>(nontarget_scores.end() - it) / n_nt;
  };
  auto frr_at = [&](double tau) {
    // rejections among targets: scores < tau
    const auto it = std::lower_bound(target_scores.begin(), target_scores.end(), tau);
    return static_cast<double>(it - target_scores.begin()) / n_t;
  };

  EERResult res;
  res.n_target = static_cast<int>(target_scores.size());
  res.n_nontarget = static_cast<int>(nontarget_scores.size());

  double prev_tau = thresholds.front();
  double prev_diff = far_at(prev_tau) - frr_at(prev_tau);  // starts at +1
  for (size_t i = 1; i < thresholds.size(); ++i) {
    const double tau = thresholds[i];
    const double far = far_at(tau);
    const double frr = frr_at(tau);
    const double diff = far - frr;
    if (diff == 0.0) {
      // plateau: extend to the last threshold where the rates stay equal
      size_t j = i;
      while (j + 1 < thresholds.size() &&
             far_at(thresholds[j + 1]) - frr_at(thresholds[j + 1]) == 0.0)
        ++j;
      res.eer = far;
      res.threshold = (prev_tau + thresholds[j]) / 2.0;
      return res;
    }
    if (diff < 0.0) {
      const double lambda = prev_diff / (prev_diff - diff);
      const double prev_far = far_at(prev_tau);
      const double prev_frr = frr_at(prev_tau);
      res.eer = prev_far + lambda * (far - prev_far);
      // FAR and FRR interpolants cross here; average guards against rounding
      res.eer = 0.5 * (res.eer + (prev_frr + lambda * (frr - prev_frr)));
      res.threshold = prev_tau + lambda * (tau - prev_tau);
      return res;
    }
    prev_tau = tau;
    prev_diff = diff;
  }
  throw NumericDomainError("compute_eer: no crossing found");
}

struct GenderEER {
  EERResult female;
  EERResult male;
  double average = 0.0;
};

// Mean of the female and male equal error rates. scores[i] belongs to
// trials[i].
inline GenderEER gender_averaged_eer(const std::vector<Trial>& trials,
                                     const std::vector<double>& scores) {
  if (trials.size() != scores.size())
    throw InvalidInputError("gender_averaged_eer: trials/scores size mismatch");
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> parts;
  for (size_t i = 0; i < trials.size(); ++i) {
    auto& p = parts[trials[i].gender];
    (trials[i].target ? p.first : p.second).push_back(scores[i]);
  }
  for (const char* g : {"female", "male"}) {
    auto it = parts.find(g);
    if (it == parts.end() || it->second.first.empty() || it->second.second.empty())
      throw InvalidDataError(std::string("gender_averaged_eer: missing ") + g +
                             " target/nontarget trials");
  }
  GenderEER out;
  out.female = compute_eer(parts["female"].first, parts["female"].second);
  out.male = compute_eer(parts["male"].first, parts["male"].second);
  out.average = 0.5 * (out.female.eer + out.male.eer);
  return out;
}

// ---------------------------------------------------------------------------
// Embedding store: utt_id -> embedding plus {emb_dim, model_checksum} meta.
// ---------------------------------------------------------------------------

struct EmbeddingStore {
  std::map<std::string, Vector> embeddings;
  int emb_dim = 0;
  std::string model_checksum;

  const Vector& at(const std::string& utt_id) const {
    auto it = embeddings.find(utt_id);
    if (it == embeddings.end())
      throw LookupError("embedding store has no utterance '" + utt_id + "'");
    return it->second;
  }

  void save(const std::string& path) const {
    ArrayContainer c;
    c.meta["emb_dim"] = emb_dim;
    c.meta["model_checksum"] = model_checksum;
    for (const auto& [id, v] : embeddings) c.arrays["emb." + id] = v.transpose();
    c.save(path);
  }

  static EmbeddingStore load(const std::string& path) {
    ArrayContainer c = ArrayContainer::load(path);
    EmbeddingStore out;
    out.emb_dim = c.meta.value("emb_dim", 0);
    out.model_checksum = c.meta.value("model_checksum", "");
    for (const auto& [name, m] : c.arrays) {
      if (name.rfind("emb.", 0) != 0) continue;
      if (m.rows() != 1 || m.cols() != out.emb_dim)
        throw InvalidDataError("embedding store entry with bad shape: " + name);
      out.embeddings[name.substr(4)] = m.row(0).transpose();
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Protocol evaluation: averaged-enrollment cosine scoring, per-gender EER.
// ---------------------------------------------------------------------------

struct EvalReport {
  double eer_female = 0.0;
  double eer_male = 0.0;
  double eer_avg = 0.0;
  double threshold_female = 0.0;
  double threshold_male = 0.0;
  int n_trials = 0;
  int n_target = 0;
  int n_nontarget = 0;

  nlohmann::json to_json() const {
    return {{"eer_female", eer_female},   {"eer_male", eer_male},
            {"eer_avg", eer_avg},         {"threshold_female", threshold_female},
            {"threshold_male", threshold_male}, {"n_trials", n_trials},
            {"n_target", n_target},       {"n_nontarget", n_nontarget}};
  }
};

inline std::vector<double> score_trials(const EmbeddingStore& store, const Protocol& protocol) {
  if (protocol.trials.empty()) throw InvalidDataError("score_trials: empty trial list");
  std::map<std::string, Vector> models;
  for (const auto& [enroll_id, utts] : protocol.enroll_map) {
    std::vector<SpeakerEmbedding> embs;
    for (const auto& u : utts) embs.push_back({store.at(u), u});
    models[enroll_id] = enrollment_model(embs).vector;
  }
  std::vector<double> scores;
  scores.reserve(protocol.trials.size());
  for (const auto& t : protocol.trials) {
    auto it = models.find(t.enroll_id);
    if (it == models.end())
      throw LookupError("no enrollment model for '" + t.enroll_id + "'");
    scores.push_back(cosine_score(it->second, store.at(t.test_utt_id)));
  }
  return scores;
}

inline void write_scores(const std::string& path, const Protocol& protocol,
                         const std::vector<double>& scores) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  for (size_t i = 0; i < protocol.trials.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", scores[i]);
    f << protocol.trials[i].enroll_id << ' ' << protocol.trials[i].test_utt_id << ' ' << buf
      << '\n';
  }
  if (!f) throw IoError("short write: " + path);
}

inline EvalReport evaluate_protocol(const EmbeddingStore& store, const Protocol& protocol,
                                    const std::string& score_path = "") {
  const std::vector<double> scores = score_trials(store, protocol);
  if (!score_path.empty()) write_scores(score_path, protocol, scores);
  const GenderEER g = gender_averaged_eer(protocol.trials, scores);
  EvalReport r;
  r.eer_female = g.female.eer;
  r.eer_male = g.male.eer;
  r.eer_avg = g.average;
  r.threshold_female = g.female.threshold;
  r.threshold_male = g.male.threshold;
  r.n_trials = static_cast<int>(protocol.trials.size());
  r.n_target = g.female.n_target + g.male.n_target;
  r.n_nontarget = g.female.n_nontarget + g.male.n_nontarget;
  return r;
}

}  // namespace dsv
