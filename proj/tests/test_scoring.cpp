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

#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>

#include "dsv/scoring.hpp"
#include "testutil.hpp"

using dsv::EERResult;
using dsv::SpeakerEmbedding;
using dsv::Trial;
using dsv::Vector;

namespace {

// Exhaustive threshold sweep: minimizes |FAR - FRR| over all candidate
// cutoffs (every score and the midpoints between neighbours), ties broken by
// the smaller max rate; EER is the average of the two rates there.
double oracle_eer(const std::vector<double>& targets, const std::vector<double>& nontargets) {
  std::vector<double> candidates;
  for (double s : targets) candidates.push_back(s);
  for (double s : nontargets) candidates.push_back(s);
  std::sort(candidates.begin(), candidates.end());
  std::vector<double> taus;
  taus.push_back(candidates.front() - 1.0);
  for (size_t i = 0; i < candidates.size(); ++i) {
    taus.push_back(candidates[i]);
    if (i + 1 < candidates.size())
      taus.push_back(0.5 * (candidates[i] + candidates[i + 1]));
  }
  taus.push_back(candidates.back() + 1.0);

  double best_gap = 1e18, best_max = 1e18, best_eer = 0.5;
  for (double tau : taus) {
    int fa = 0, fr = 0;
    for (double s : nontargets)
      if (s >= tau) ++fa;
    for (double s : targets)
      if (s < tau) ++fr;
    const double far = static_cast<double>(fa) / static_cast<double>(nontargets.size());
    const double frr = static_cast<double>(fr) / static_cast<double>(targets.size());
    const double gap = std::abs(far - frr);
    const double mx = std::max(far, frr);
    if (gap < best_gap - 1e-15 || (std::abs(gap - best_gap) <= 1e-15 && mx < best_max)) {
      best_gap = gap;
      best_max = mx;
      best_eer = 0.5 * (far + frr);
    }
  }
  return best_eer;
}

}  // namespace

TEST_CASE("cosine score hits the textbook values") {
  Vector a(2), b(2), c(2);
  a << 1.0, 0.0;
  b << 0.0, 1.0;
  c << 1.0, 1.0;
  REQUIRE(dsv::cosine_score(a, a) == 1.0);
  REQUIRE(dsv::cosine_score(a, b) == 0.0);
  REQUIRE(dsv::cosine_score(c, a) == Catch::Approx(0.7071).margin(5e-5));
  REQUIRE_THROWS_AS(dsv::cosine_score(Vector::Zero(2), a), dsv::NumericDomainError);
}

TEST_CASE("cosine score is symmetric and scale invariant") {
  auto rng = std::mt19937_64(1);
  for (int i = 0; i < 20; ++i) {
    Vector a = testutil::random_matrix(6, 1, rng).col(0);
    Vector b = testutil::random_matrix(6, 1, rng).col(0);
    REQUIRE(dsv::cosine_score(a, b) == dsv::cosine_score(b, a));
    REQUIRE(dsv::cosine_score(Vector(3.7 * a), b) ==
            Catch::Approx(dsv::cosine_score(a, b)).margin(1e-12));
  }
}

TEST_CASE("enrollment model averages embeddings") {
  SpeakerEmbedding e1{(Vector(2) << 1.0, 0.0).finished(), "a"};
  SpeakerEmbedding e2{(Vector(2) << 0.0, 1.0).finished(), "b"};
  REQUIRE((dsv::enrollment_model({e1}).vector - e1.vector).cwiseAbs().maxCoeff() == 0.0);
  const Vector mean = dsv::enrollment_model({e1, e2}).vector;
  REQUIRE(mean(0) == 0.5);
  REQUIRE(mean(1) == 0.5);
  const Vector same = dsv::enrollment_model({e1, e1, e1}).vector;
  REQUIRE((same - e1.vector).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE_THROWS_AS(dsv::enrollment_model({}), dsv::InvalidInputError);
}

TEST_CASE("perfectly separated scores give zero EER") {
  EERResult r = dsv::compute_eer({0.9, 0.8, 0.7}, {0.3, 0.2, 0.1});
  REQUIRE(r.eer == 0.0);
  REQUIRE(r.n_target == 3);
  REQUIRE(r.n_nontarget == 3);
}

TEST_CASE("derived EER example returns exactly one third") {
  EERResult r = dsv::compute_eer({0.9, 0.8, 0.4}, {0.5, 0.3, 0.1});
  REQUIRE(r.eer == 1.0 / 3.0);
  REQUIRE(r.threshold > 0.4);
  REQUIRE(r.threshold < 0.5);
}

TEST_CASE("identically distributed scores approach chance EER") {
  auto rng = std::mt19937_64(2);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> t(4000), nt(4000);
  for (auto& s : t) s = dist(rng);
  for (auto& s : nt) s = dist(rng);
  EERResult r = dsv::compute_eer(t, nt);
  REQUIRE(r.eer == Catch::Approx(0.5).margin(0.05));
}

TEST_CASE("empty score lists are rejected") {
  REQUIRE_THROWS_AS(dsv::compute_eer({}, {0.1}), dsv::InvalidInputError);
  REQUIRE_THROWS_AS(dsv::compute_eer({0.1}, {}), dsv::InvalidInputError);
}

TEST_CASE("interpolated EER stays within the discretization bound of the oracle") {
  auto rng = std::mt19937_64(3);
  std::uniform_int_distribution<int> size_dist(1, 120);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<double> t(static_cast<size_t>(size_dist(rng)));
    std::vector<double> nt(static_cast<size_t>(size_dist(rng)));
    const double shift = trial % 3 == 0 ? 0.0 : 1.0;
    for (auto& s : t) s = dist(rng) + shift;
    for (auto& s : nt) s = dist(rng);
    const double bound =
        1.0 / (2.0 * static_cast<double>(std::min(t.size(), nt.size())));
    const double interp = dsv::compute_eer(t, nt).eer;
    const double oracle = oracle_eer(t, nt);
    REQUIRE(std::abs(interp - oracle) <= bound + 1e-12);
  }
}

TEST_CASE("EER is invariant under strictly monotone score transforms") {
  auto rng = std::mt19937_64(4);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> t(50), nt(70);
  for (auto& s : t) s = dist(rng) + 0.6;
  for (auto& s : nt) s = dist(rng);
  const double base = dsv::compute_eer(t, nt).eer;

  auto apply = [&](auto f) {
    std::vector<double> t2 = t, nt2 = nt;
    for (auto& s : t2) s = f(s);
    for (auto& s : nt2) s = f(s);
    return dsv::compute_eer(t2, nt2).eer;
  };
  REQUIRE(apply([](double x) { return 3.0 * x + 1.0; }) == base);
  REQUIRE(apply([](double x) { return std::exp(x); }) == base);
  REQUIRE(apply([](double x) { return x * x * x; }) == base);
}

TEST_CASE("swapping classes with negated scores preserves the EER") {
  auto rng = std::mt19937_64(5);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> t(31), nt(47);
    for (auto& s : t) s = dist(rng) + 0.8;
    for (auto& s : nt) s = dist(rng);
    std::vector<double> t_neg = nt, nt_neg = t;
    for (auto& s : t_neg) s = -s;
    for (auto& s : nt_neg) s = -s;
    REQUIRE(std::abs(dsv::compute_eer(t, nt).eer - dsv::compute_eer(t_neg, nt_neg).eer) <
            1e-12);
  }
}

namespace {

std::vector<Trial> make_trials(const std::vector<double>& t_f, const std::vector<double>& nt_f,
                               const std::vector<double>& t_m, const std::vector<double>& nt_m,
                               std::vector<double>& scores) {
  std::vector<Trial> trials;
  auto add = [&](const std::vector<double>& s, bool target, const std::string& g) {
    for (double v : s) {
      trials.push_back({"e", "u", target, g});
      scores.push_back(v);
    }
  };
  add(t_f, true, "female");
  add(nt_f, false, "female");
  add(t_m, true, "male");
  add(nt_m, false, "male");
  return trials;
}

}  // namespace

TEST_CASE("gender-averaged EER is the arithmetic mean of the partitions") {
  std::vector<double> scores;
  // female partition EER 0.1, male partition EER 0.2
  std::vector<double> t_f(9, 1.0), nt_f(9, 0.0), t_m(8, 1.0), nt_m(8, 0.0);
  t_f.push_back(0.05);
  nt_f.push_back(0.95);
  t_m.insert(t_m.end(), {0.05, 0.06});
  nt_m.insert(nt_m.end(), {0.95, 0.96});
  auto trials = make_trials(t_f, nt_f, t_m, nt_m, scores);
  const auto g = dsv::gender_averaged_eer(trials, scores);
  REQUIRE(g.female.eer == Catch::Approx(0.1).margin(1e-12));
  REQUIRE(g.male.eer == Catch::Approx(0.2).margin(1e-12));
  REQUIRE(g.average == Catch::Approx(0.15).margin(1e-12));
}

TEST_CASE("gender-averaged EER on the derived 1/3 and 1/4 partitions") {
  std::vector<double> scores;
  auto trials = make_trials({0.9, 0.8, 0.4}, {0.5, 0.3, 0.1}, {0.9, 0.8, 0.7, 0.4},
                            {0.5, 0.3, 0.2, 0.1}, scores);
  const auto g = dsv::gender_averaged_eer(trials, scores);
  REQUIRE(g.female.eer == 1.0 / 3.0);
  REQUIRE(g.male.eer == 1.0 / 4.0);
  REQUIRE(g.average == Catch::Approx(7.0 / 24.0).margin(1e-15));
}

TEST_CASE("perfect separation in both partitions averages to zero") {
  std::vector<double> scores;
  auto trials = make_trials({0.9, 0.8}, {0.1, 0.2}, {0.7, 0.6}, {0.0, 0.05}, scores);
  REQUIRE(dsv::gender_averaged_eer(trials, scores).average == 0.0);
}

TEST_CASE("missing gender partitions are rejected") {
  std::vector<Trial> trials = {{"e", "u", true, "female"}, {"e", "u", false, "female"}};
  std::vector<double> scores = {0.9, 0.1};
  REQUIRE_THROWS_AS(dsv::gender_averaged_eer(trials, scores), dsv::InvalidDataError);
}

TEST_CASE("embedding store round-trips and names missing utterances") {
  testutil::TempDir tmp("embstore");
  auto rng = std::mt19937_64(6);
  dsv::EmbeddingStore store;
  store.emb_dim = 4;
  store.model_checksum = "abc123";
  store.embeddings["u1"] = testutil::random_matrix(4, 1, rng).col(0);
  store.embeddings["u2"] = testutil::random_matrix(4, 1, rng).col(0);
  store.save(tmp.file("emb.bin"));

  auto back = dsv::EmbeddingStore::load(tmp.file("emb.bin"));
  REQUIRE(back.emb_dim == 4);
  REQUIRE(back.model_checksum == "abc123");
  REQUIRE((back.at("u1") - store.at("u1")).cwiseAbs().maxCoeff() == 0.0);
  try {
    back.at("nope");
    FAIL("expected LookupError");
  } catch (const dsv::LookupError& e) {
    REQUIRE(std::string(e.what()).find("nope") != std::string::npos);
  }
}

TEST_CASE("protocol evaluation scores trials and writes six-decimal scores") {
  testutil::TempDir tmp("eval");
  // two female + two male speakers, linearly separable embeddings
  dsv::EmbeddingStore store;
  store.emb_dim = 3;
  const std::vector<std::string> spks = {"f0", "f1", "m0", "m1"};
  for (size_t s = 0; s < spks.size(); ++s) {
    Vector base = Vector::Zero(3);
    base(static_cast<Eigen::Index>(s % 3)) = 1.0;
    base(2) = s >= 2 ? 1.0 : -1.0;
    for (int u = 0; u < 3; ++u) {
      Vector v = base;
      v(0) += 0.01 * u;
      store.embeddings[spks[s] + "_u" + std::to_string(u)] = v;
    }
  }
  dsv::Protocol protocol;
  for (const auto& s : spks) {
    protocol.enroll_map[s + "-enr"] = {s + "_u0", s + "_u1"};
    const std::string gender = s[0] == 'f' ? "female" : "male";
    protocol.trials.push_back({s + "-enr", s + "_u2", true, gender});
    const std::string other = s[0] == 'f' ? (s == "f0" ? "f1" : "f0")
                                          : (s == "m0" ? "m1" : "m0");
    protocol.trials.push_back({s + "-enr", other + "_u2", false, gender});
  }

  const auto report = dsv::evaluate_protocol(store, protocol, tmp.file("scores.txt"));
  REQUIRE(report.eer_avg == 0.0);
  REQUIRE(report.n_trials == 8);

  std::ifstream f(tmp.file("scores.txt"));
  std::string enroll, utt, score;
  int lines = 0;
  while (f >> enroll >> utt >> score) {
    ++lines;
    const auto dot = score.find('.');
    REQUIRE(dot != std::string::npos);
    REQUIRE(score.size() - dot - 1 == 6);
  }
  REQUIRE(lines == 8);

  // duplicated trial lines do not change the EER
  dsv::Protocol doubled = protocol;
  doubled.trials.insert(doubled.trials.end(), protocol.trials.begin(), protocol.trials.end());
  REQUIRE(dsv::evaluate_protocol(store, doubled).eer_avg == report.eer_avg);

  dsv::Protocol empty;
  REQUIRE_THROWS_AS(dsv::evaluate_protocol(store, empty), dsv::InvalidDataError);

  dsv::Protocol missing = protocol;
  missing.trials[0].test_utt_id = "ghost";
  REQUIRE_THROWS_AS(dsv::evaluate_protocol(store, missing), dsv::LookupError);
}
