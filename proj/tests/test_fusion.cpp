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

#include "dsv/fusion.hpp"
#include "testutil.hpp"

using dsv::FeatureMatrix;
using dsv::Matrix;

TEST_CASE("hadamard fusion identities") {
  auto rng = std::mt19937_64(1);
  Matrix a = testutil::random_matrix(7, 4, rng);

  REQUIRE((dsv::fuse_mid(a, Matrix::Ones(7, 4)) - a).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(dsv::fuse_mid(Matrix::Zero(7, 4), a).cwiseAbs().maxCoeff() == 0.0);

  Matrix x(1, 2), y(1, 2);
  x << 2.0, 3.0;
  y << 4.0, 5.0;
  Matrix z = dsv::fuse_mid(x, y);
  REQUIRE(z(0, 0) == 8.0);
  REQUIRE(z(0, 1) == 15.0);
}

TEST_CASE("hadamard fusion commutes and rejects shape mismatch") {
  auto rng = std::mt19937_64(2);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a = testutil::random_matrix(5, 6, rng);
    Matrix b = testutil::random_matrix(5, 6, rng);
    REQUIRE((dsv::fuse_mid(a, b) - dsv::fuse_mid(b, a)).cwiseAbs().maxCoeff() == 0.0);
  }
  REQUIRE_THROWS_AS(dsv::fuse_mid(Matrix::Zero(3, 4), Matrix::Zero(4, 3)),
                    dsv::InvalidInputError);
}

TEST_CASE("hadamard fusion gradients match finite differences") {
  auto rng = std::mt19937_64(3);
  Matrix a = testutil::random_matrix(4, 3, rng);
  Matrix b = testutil::random_matrix(4, 3, rng);
  const Matrix probe = testutil::random_matrix(4, 3, rng);
  auto [ga, gb] = dsv::fuse_mid_backward(a, b, probe);

  auto loss = [&]() { return (dsv::fuse_mid(a, b).array() * probe.array()).sum(); };
  REQUIRE(testutil::max_input_grad_rel_err(a, ga, loss) < 1e-5);
  REQUIRE(testutil::max_input_grad_rel_err(b, gb, loss) < 1e-5);
}

TEST_CASE("raw fusion concatenates columns and recovers both inputs") {
  auto rng = std::mt19937_64(4);
  FeatureMatrix h{testutil::random_matrix(9, 32, rng), 100.0};
  FeatureMatrix x{testutil::random_matrix(9, 80, rng), 100.0};
  auto fused = dsv::fuse_raw(h, x);
  REQUIRE(fused.dim() == 112);
  REQUIRE((fused.values.leftCols(32) - h.values).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((fused.values.rightCols(80) - x.values).cwiseAbs().maxCoeff() == 0.0);

  FeatureMatrix zeros{Matrix::Zero(9, 80), 100.0};
  auto fz = dsv::fuse_raw(h, zeros);
  REQUIRE(fz.values.rightCols(80).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((fz.values.leftCols(32) - h.values).cwiseAbs().maxCoeff() == 0.0);

  FeatureMatrix shorter{Matrix::Zero(8, 80), 100.0};
  REQUIRE_THROWS_AS(dsv::fuse_raw(h, shorter), dsv::InvalidInputError);
}

TEST_CASE("alignment returns equal-rate equal-length inputs unchanged") {
  auto rng = std::mt19937_64(5);
  FeatureMatrix a{testutil::random_matrix(12, 3, rng), 100.0};
  FeatureMatrix b{testutil::random_matrix(12, 5, rng), 100.0};
  auto r = dsv::align_frame_rates(a, b);
  REQUIRE((r.a.values - a.values).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((r.b.values - b.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("alignment resamples the higher-rate stream by nearest frame") {
  auto rng = std::mt19937_64(6);
  FeatureMatrix fast{testutil::random_matrix(100, 2, rng), 100.0};
  FeatureMatrix slow{testutil::random_matrix(50, 3, rng), 50.0};
  auto r = dsv::align_frame_rates(fast, slow);
  REQUIRE(r.a.frames() == 50);
  REQUIRE(r.b.frames() == 50);
  for (Eigen::Index t = 0; t < 50; ++t) {
    REQUIRE(r.a_rows[static_cast<size_t>(t)] == 2 * t);
    REQUIRE((r.a.values.row(t) - fast.values.row(2 * t)).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((r.b.values.row(t) - slow.values.row(t)).cwiseAbs().maxCoeff() == 0.0);
  }
  REQUIRE(r.a.frame_rate == 50.0);
}

TEST_CASE("alignment truncates same-rate streams to the shorter length") {
  auto rng = std::mt19937_64(7);
  FeatureMatrix a{testutil::random_matrix(101, 2, rng), 100.0};
  FeatureMatrix b{testutil::random_matrix(100, 2, rng), 100.0};
  auto r = dsv::align_frame_rates(a, b);
  REQUIRE(r.a.frames() == 100);
  REQUIRE(r.b.frames() == 100);
  REQUIRE((r.a.values - a.values.topRows(100)).cwiseAbs().maxCoeff() == 0.0);

  FeatureMatrix empty{Matrix::Zero(0, 2), 100.0};
  REQUIRE_THROWS_AS(dsv::align_frame_rates(empty, b), dsv::InvalidInputError);
}
