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
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dsv/common.hpp"

namespace dsv {

// One corpus utterance. transform_id is empty for untransformed audio and is
// serialized as "-".
struct ManifestEntry {
  std::string utt_id;
  std::string speaker_id;
  std::string gender;  // "female" | "male"
  std::string path;    // wav path, absolute or relative to the manifest file
  std::string transform_id;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  std::string base_dir;  // directory of the file this was read from

  void validate() const {
    std::set<std::string> ids;
    for (const auto& e : entries) {
      if (e.utt_id.empty() || e.speaker_id.empty())
        throw InvalidDataError("manifest: empty utt or speaker id");
      if (!ids.insert(e.utt_id).second)
        throw InvalidDataError("manifest: duplicate utt_id " + e.utt_id);
      if (e.gender != "female" && e.gender != "male")
        throw InvalidDataError("manifest: bad gender '" + e.gender + "' for " + e.utt_id);
      for (const std::string* f : {&e.utt_id, &e.speaker_id, &e.path, &e.transform_id})
        if (f->find_first_of(" \t\n") != std::string::npos)
          throw InvalidDataError("manifest: whitespace in field of " + e.utt_id);
    }
  }

  std::string resolve_path(const ManifestEntry& e) const {
    std::filesystem::path p(e.path);
    if (p.is_absolute() || base_dir.empty()) return e.path;
    return (std::filesystem::path(base_dir) / p).string();
  }

  std::vector<std::string> speakers() const {
    std::set<std::string> s;
    for (const auto& e : entries) s.insert(e.speaker_id);
    return {s.begin(), s.end()};
  }

  std::map<std::string, std::vector<size_t>> by_speaker() const {
    std::map<std::string, std::vector<size_t>> out;
    for (size_t i = 0; i < entries.size(); ++i) out[entries[i].speaker_id].push_back(i);
    return out;
  }

  std::set<std::string> transform_ids() const {
    std::set<std::string> out;
    for (const auto& e : entries)
      if (!e.transform_id.empty()) out.insert(e.transform_id);
    return out;
  }

  Manifest filter(const std::function<bool(const ManifestEntry&)>& keep) const {
    Manifest out;
    out.base_dir = base_dir;
    for (const auto& e : entries)
      if (keep(e)) out.entries.push_back(e);
    return out;
  }

  Manifest without_transform(const std::string& transform_id) const {
    return filter([&](const ManifestEntry& e) { return e.transform_id != transform_id; });
  }

  Manifest only_transform(const std::string& transform_id) const {
    return filter([&](const ManifestEntry& e) { return e.transform_id == transform_id; });
  }

  void write(const std::string& path) const {
    validate();
    namespace fs = std::filesystem;
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
      std::ofstream f(tmp);
      if (!f) throw IoError("cannot open for writing: " + tmp.string());
      for (const auto& e : entries)
        f << e.utt_id << ' ' << e.speaker_id << ' ' << e.gender << ' ' << e.path << ' '
          << (e.transform_id.empty() ? "-" : e.transform_id) << '\n';
      if (!f) throw IoError("short write: " + tmp.string());
    }
    fs::rename(tmp, target);
  }

  static Manifest read(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest: " + path);
    Manifest out;
    out.base_dir = std::filesystem::path(path).parent_path().string();
    std::string line;
    size_t line_no = 0;
    while (std::getline(f, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream iss(line);
      ManifestEntry e;
      std::string transform;
      if (!(iss >> e.utt_id >> e.speaker_id >> e.gender >> e.path >> transform))
        throw InvalidDataError("manifest: bad line " + std::to_string(line_no) + " in " +
                               path);
      std::string extra;
      if (iss >> extra)
        throw InvalidDataError("manifest: trailing fields on line " +
                               std::to_string(line_no) + " in " + path);
      e.transform_id = transform == "-" ? "" : transform;
      out.entries.push_back(std::move(e));
    }
    out.validate();
    return out;
  }
};

}  // namespace dsv
