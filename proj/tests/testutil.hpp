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

#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/nn.hpp"

namespace testutil {

inline double rel_err(double a, double b, double floor = 1e-9) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Central finite differences over every coordinate of the given tensors,
// compared against the analytic gradients already accumulated in them.
// `loss` must be a pure function of the tensor values. Returns the max
// relative error; absolute deviations below atol are ignored.
inline double max_grad_rel_err(const std::vector<dsv::Tensor*>& params,
                               const std::function<double()>& loss, double h = 1e-6,
                               double atol = 1e-9) {
  double worst = 0.0;
  for (dsv::Tensor* t : params) {
    for (Eigen::Index r = 0; r < t->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < t->value.cols(); ++c) {
        const double orig = t->value(r, c);
        const double step = h * std::max(1.0, std::abs(orig));
        t->value(r, c) = orig + step;
        const double up = loss();
        t->value(r, c) = orig - step;
        const double down = loss();
        t->value(r, c) = orig;
        const double numeric = (up - down) / (2.0 * step);
        const double analytic = t->grad(r, c);
        if (std::abs(numeric - analytic) <= atol) continue;
        worst = std::max(worst, rel_err(analytic, numeric));
      }
    }
  }
  return worst;
}

// Same check for the gradient w.r.t. an input matrix.
inline double max_input_grad_rel_err(dsv::Matrix& x, const dsv::Matrix& analytic,
                                     const std::function<double()>& loss, double h = 1e-6,
                                     double atol = 1e-9) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double orig = x(r, c);
      const double step = h * std::max(1.0, std::abs(orig));
      x(r, c) = orig + step;
      const double up = loss();
      x(r, c) = orig - step;
      const double down = loss();
      x(r, c) = orig;
      const double numeric = (up - down) / (2.0 * step);
      if (std::abs(numeric - analytic(r, c)) <= atol) continue;
      worst = std::max(worst, rel_err(analytic(r, c), numeric));
    }
  }
  return worst;
}

inline dsv::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                 double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  dsv::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

// Plain O(N^2) DFT power spectrum; independent oracle for anything FFT-based.
inline std::vector<double> naive_dft_power(const std::vector<double>& x) {
  const size_t n = x.size();
  std::vector<double> power(n / 2 + 1);
  for (size_t k = 0; k < power.size(); ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) * static_cast<double>(t) /
                         static_cast<double>(n);
      acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    power[k] = std::norm(acc);
  }
  return power;
}

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("dsv_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace testutil
