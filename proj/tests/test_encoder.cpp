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

#include "dsv/encoder.hpp"
#include "testutil.hpp"

using dsv::EcapaEncoder;
using dsv::EncoderConfig;
using dsv::Matrix;

namespace {

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.in_dim = 4;
  cfg.channels = 8;
  cfg.n_blocks = 1;
  cfg.dilations = {2};
  cfg.res2_scale = 4;
  cfg.se_bottleneck = 4;
  cfg.out_dim = 6;
  return cfg;
}

size_t param_count(EcapaEncoder& enc) {
  dsv::ParamRefs refs;
  enc.collect(refs);
  size_t n = 0;
  for (auto* t : refs) n += static_cast<size_t>(t->value.size());
  return n;
}

}  // namespace

TEST_CASE("encoder init is seed-deterministic with disjoint storage") {
  EncoderConfig cfg = tiny_config();
  EcapaEncoder a(cfg, 42), b(cfg, 42), c(cfg, 43);
  auto pa = a.params(), pb = b.params(), pc = c.params();
  REQUIRE(pa.size() == pb.size());
  bool any_diff_seed43 = false;
  for (const auto& [name, m] : pa) {
    REQUIRE((pb.at(name) - m).cwiseAbs().maxCoeff() == 0.0);
    if ((pc.at(name) - m).cwiseAbs().maxCoeff() > 0.0) any_diff_seed43 = true;
  }
  REQUIRE(any_diff_seed43);

  // mutating one encoder must not touch the other
  dsv::ParamRefs refs;
  a.collect(refs);
  refs.front()->value.array() += 1.0;
  REQUIRE((b.params().at(refs.front()->name) - refs.front()->value).cwiseAbs().maxCoeff() >
          0.0);
}

TEST_CASE("channels must divide by res2_scale") {
  EncoderConfig cfg = tiny_config();
  cfg.channels = 10;
  cfg.res2_scale = 4;
  REQUIRE_THROWS_AS(EcapaEncoder(cfg, 1), dsv::InvalidConfigError);
}

TEST_CASE("res2 sub-branch widths follow channels / scale") {
  EncoderConfig cfg;
  cfg.in_dim = 12;
  cfg.channels = 64;
  cfg.res2_scale = 4;
  cfg.n_blocks = 3;
  EcapaEncoder enc(cfg, 7);
  auto params = enc.params();
  for (int b = 0; b < 3; ++b)
    for (int j = 1; j < 4; ++j) {
      const auto& w =
          params.at("enc.block" + std::to_string(b) + ".res2_" + std::to_string(j) + ".w");
      REQUIRE(w.rows() == 3 * 16);  // kernel 3, in width 16
      REQUIRE(w.cols() == 16);
    }
}

TEST_CASE("output is T x out_dim and eval mode is deterministic") {
  auto rng = std::mt19937_64(3);
  for (int T : {1, 5, 23}) {
    EncoderConfig cfg = tiny_config();
    Matrix x = testutil::random_matrix(T, cfg.in_dim, rng);
    EcapaEncoder enc(cfg, 11);
    EcapaEncoder::Cache cache;
    Matrix y1 = enc.forward(x, false, 0.0, nullptr, cache);
    Matrix y2 = enc.forward(x, false, 0.0, nullptr, cache);
    REQUIRE(y1.rows() == T);
    REQUIRE(y1.cols() == 6);
    REQUIRE((y1 - y2).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(y1.allFinite());
  }
}

TEST_CASE("time length is preserved across block stacks") {
  auto rng = std::mt19937_64(4);
  EncoderConfig cfg;
  cfg.in_dim = 6;
  cfg.channels = 16;
  cfg.res2_scale = 4;
  cfg.out_dim = 10;
  for (int blocks : {1, 2, 3}) {
    cfg.n_blocks = blocks;
    EcapaEncoder enc(cfg, 5);
    for (int T : {2, 9, 31}) {
      Matrix x = testutil::random_matrix(T, cfg.in_dim, rng);
      EcapaEncoder::Cache cache;
      REQUIRE(enc.forward(x, false, 0.0, nullptr, cache).rows() == T);
    }
  }
}

TEST_CASE("encoder rejects mismatched input width") {
  EcapaEncoder enc(tiny_config(), 2);
  EcapaEncoder::Cache cache;
  Matrix x = Matrix::Zero(5, 7);
  REQUIRE_THROWS_AS(enc.forward(x, false, 0.0, nullptr, cache), dsv::InvalidInputError);
}

TEST_CASE("SE gates stay strictly inside (0,1)") {
  auto rng = std::mt19937_64(9);
  EncoderConfig cfg = tiny_config();
  cfg.n_blocks = 2;
  cfg.dilations = {2, 3};
  EcapaEncoder enc(cfg, 21);
  Matrix x = testutil::random_matrix(12, cfg.in_dim, rng, 2.0);
  EcapaEncoder::Cache cache;
  enc.forward(x, false, 0.0, nullptr, cache);
  for (const auto& bc : cache.blocks) {
    REQUIRE((bc.se_gate.array() > 0.0).all());
    REQUIRE((bc.se_gate.array() < 1.0).all());
  }
}

TEST_CASE("dropout only acts in training mode and is seed-reproducible") {
  auto rng = std::mt19937_64(13);
  EncoderConfig cfg = tiny_config();
  EcapaEncoder enc(cfg, 8);
  Matrix x = testutil::random_matrix(10, cfg.in_dim, rng);
  EcapaEncoder::Cache cache;
  Matrix eval_out = enc.forward(x, false, 0.5, nullptr, cache);
  Matrix eval_out2 = enc.forward(x, false, 0.5, nullptr, cache);
  REQUIRE((eval_out - eval_out2).cwiseAbs().maxCoeff() == 0.0);

  auto rng_a = dsv::make_rng(77);
  auto rng_b = dsv::make_rng(77);
  Matrix tr_a = enc.forward(x, true, 0.5, &rng_a, cache);
  Matrix tr_b = enc.forward(x, true, 0.5, &rng_b, cache);
  REQUIRE((tr_a - tr_b).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((tr_a - eval_out).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("encoder gradients match central finite differences on a sub-1k config") {
  auto rng = std::mt19937_64(17);
  EncoderConfig cfg = tiny_config();
  EcapaEncoder enc(cfg, 31);
  REQUIRE(param_count(enc) <= 1000);

  const int T = 6;
  Matrix x = testutil::random_matrix(T, cfg.in_dim, rng);
  const Matrix probe = testutil::random_matrix(T, cfg.out_dim, rng);

  EcapaEncoder::Cache cache;
  auto loss = [&]() {
    EcapaEncoder::Cache c;
    return (enc.forward(x, false, 0.0, nullptr, c).array() * probe.array()).sum();
  };

  dsv::ParamRefs refs;
  enc.collect(refs);
  for (auto* t : refs) t->zero_grad();
  enc.forward(x, false, 0.0, nullptr, cache);
  Matrix gx = enc.backward(cache, probe);

  REQUIRE(testutil::max_grad_rel_err(refs, loss) < 1e-4);
  REQUIRE(testutil::max_input_grad_rel_err(x, gx, loss) < 1e-4);
}

TEST_CASE("set_params round-trips and validates shapes") {
  EncoderConfig cfg = tiny_config();
  EcapaEncoder a(cfg, 1), b(cfg, 2);
  auto pa = a.params();
  b.set_params(pa);
  auto pb = b.params();
  for (const auto& [name, m] : pa)
    REQUIRE((pb.at(name) - m).cwiseAbs().maxCoeff() == 0.0);

  auto bad = pa;
  bad.begin()->second = Matrix::Zero(1, 1);
  REQUIRE_THROWS_AS(b.set_params(bad), dsv::InvalidInputError);
}
