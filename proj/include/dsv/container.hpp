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

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsv/common.hpp"

namespace dsv {

// Binary array container: 8-byte magic, u64 header length, JSON header
// (version, free-form "meta" object, array index), then row-major float64
// array payloads, little-endian. One format serves layer-stack files,
// embedding stores and training checkpoints; see docs/FORMATS.md.
struct ArrayContainer {
  nlohmann::json meta;
  std::map<std::string, Matrix> arrays;  // ordered so writes are reproducible

  static constexpr char kMagic[8] = {'D', 'S', 'V', 'B', 'I', 'N', '1', '\n'};
  static constexpr int kVersion = 1;

  void save(const std::string& path) const {
    nlohmann::json header;
    header["version"] = kVersion;
    header["meta"] = meta;
    auto index = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& [name, m] : arrays) {
      index.push_back({{"name", name},
                       {"rows", m.rows()},
                       {"cols", m.cols()},
                       {"offset", offset}});
      offset += static_cast<uint64_t>(m.size()) * sizeof(double);
    }
    header["arrays"] = index;
    const std::string hs = header.dump();

    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      if (!f) throw IoError("cannot open for writing: " + tmp.string());
      f.write(kMagic, 8);
      uint64_t hlen = hs.size();
      f.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
      f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
      std::vector<double> row;
      for (const auto& [name, m] : arrays) {
        row.resize(static_cast<size_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
          for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<size_t>(c)] = m(r, c);
          f.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(double)));
        }
      }
      if (!f) throw IoError("short write: " + tmp.string());
    }
    fs::rename(tmp, target);  // atomic publish
  }

  static ArrayContainer load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
      throw IoError("bad container magic: " + path);
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    if (!f || hlen > (1ull << 30)) throw IoError("bad container header: " + path);
    std::string hs(hlen, '\0');
    f.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw IoError("truncated container header: " + path);
    nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
    if (header.is_discarded()) throw IoError("unparsable container header: " + path);
    if (header.value("version", -1) != kVersion)
      throw IoError("unsupported container version in " + path + ": " +
                    std::to_string(header.value("version", -1)));

    const std::streamoff data_start = 8 + static_cast<std::streamoff>(sizeof(hlen)) +
                                      static_cast<std::streamoff>(hlen);
    ArrayContainer out;
    out.meta = header.value("meta", nlohmann::json::object());
    for (const auto& e : header.at("arrays")) {
      const auto name = e.at("name").get<std::string>();
      const auto rows = e.at("rows").get<Eigen::Index>();
      const auto cols = e.at("cols").get<Eigen::Index>();
      const auto offset = e.at("offset").get<uint64_t>();
      if (rows < 0 || cols < 0) throw IoError("bad array shape in " + path);
      f.seekg(data_start + static_cast<std::streamoff>(offset));
      Matrix m(rows, cols);
      std::vector<double> row(static_cast<size_t>(cols));
      for (Eigen::Index r = 0; r < rows; ++r) {
        f.read(reinterpret_cast<char*>(row.data()),
               static_cast<std::streamsize>(row.size() * sizeof(double)));
        if (!f) throw IoError("truncated array data in " + path);
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<size_t>(c)];
      }
      out.arrays.emplace(name, std::move(m));
    }
    return out;
  }
};

}  // namespace dsv
