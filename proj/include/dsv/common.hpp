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

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Time-major feature matrix (rows = frames). frame_rate is frames per
// second and drives cross-stream alignment.
struct FeatureMatrix {
  Matrix values;
  double frame_rate = 100.0;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index dim() const { return values.cols(); }
};

// Error taxonomy shared across the library. Callers can catch the base
// dsv::Error to map any failure onto a process exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidInputError : Error {
  using Error::Error;
};
struct InvalidConfigError : Error {
  using Error::Error;
};
struct InvalidDataError : Error {
  using Error::Error;
};
struct NumericDomainError : Error {
  using Error::Error;
};
struct TrainingError : Error {
  using Error::Error;
};
struct LookupError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

// FNV-1a over raw bytes. Used for parameter checksums (freeze contracts,
// backbone-preservation checks), not for security.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t checksum(const Matrix& m, uint64_t h = 0xcbf29ce484222325ull) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      h = fnv1a(&v, sizeof(v), h);
    }
  return h;
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline std::string to_hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

}  // namespace dsv
