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
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dsv/common.hpp"
#include "dsv/manifest.hpp"
#include "dsv/rng.hpp"

namespace dsv {

struct Trial {
  std::string enroll_id;
  std::string test_utt_id;
  bool target = false;
  std::string gender;  // of the claimed (enrollment) speaker
};

// Verification protocol: trial list plus the enrollment map that names which
// utterances form each enrollment model.
struct Protocol {
  std::vector<Trial> trials;
  std::map<std::string, std::vector<std::string>> enroll_map;
};

inline void write_trials(const std::string& path, const std::vector<Trial>& trials) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  for (const auto& t : trials)
    f << t.enroll_id << ' ' << t.test_utt_id << ' ' << (t.target ? "target" : "nontarget")
      << ' ' << t.gender << '\n';
  if (!f) throw IoError("short write: " + path);
}

inline std::vector<Trial> read_trials(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open trials: " + path);
  std::vector<Trial> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream iss(line);
    Trial t;
    std::string label, gender;
    if (!(iss >> t.enroll_id >> t.test_utt_id >> label >> gender))
      throw InvalidDataError("trials: bad line " + std::to_string(line_no) + " in " + path);
    if (label == "target")
      t.target = true;
    else if (label == "nontarget")
      t.target = false;
    else
      throw InvalidDataError("trials: bad label '" + label + "' on line " +
                             std::to_string(line_no));
    if (gender != "female" && gender != "male")
      throw InvalidDataError("trials: bad gender '" + gender + "' on line " +
                             std::to_string(line_no));
    t.gender = gender;
    out.push_back(std::move(t));
  }
  return out;
}

inline void write_enroll_map(const std::string& path,
                             const std::map<std::string, std::vector<std::string>>& m) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  for (const auto& [enroll_id, utts] : m)
    for (const auto& u : utts) f << enroll_id << ' ' << u << '\n';
  if (!f) throw IoError("short write: " + path);
}

inline std::map<std::string, std::vector<std::string>> read_enroll_map(
    const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open enroll map: " + path);
  std::map<std::string, std::vector<std::string>> out;
  std::string enroll_id, utt;
  while (f >> enroll_id >> utt) out[enroll_id].push_back(utt);
  return out;
}

// Disjoint enrollment/test split per speaker, one enrollment model per
// speaker, balanced same-gender nontarget trials (one per target trial).
inline Protocol build_protocol(const Manifest& manifest, int n_enroll_utts, uint64_t seed) {
  if (manifest.entries.empty()) throw InvalidDataError("build_protocol: empty manifest");
  if (n_enroll_utts < 1) throw InvalidConfigError("build_protocol: n_enroll_utts must be >= 1");

  auto groups = manifest.by_speaker();
  std::map<std::string, std::string> gender_of;
  for (const auto& e : manifest.entries) gender_of[e.speaker_id] = e.gender;

  auto rng = make_rng(mix_seed(seed, 0x9207));
  std::map<std::string, std::vector<std::string>> enroll_map;
  std::map<std::string, std::vector<std::string>> tests;
  for (auto& [spk, idxs] : groups) {
    if (static_cast<int>(idxs.size()) <= n_enroll_utts)
      throw InvalidDataError("build_protocol: speaker " + spk + " has " +
                             std::to_string(idxs.size()) + " utts, needs > " +
                             std::to_string(n_enroll_utts));
    std::vector<size_t> order = idxs;
    std::shuffle(order.begin(), order.end(), rng);
    const std::string enroll_id = spk + "-enr";
    for (size_t i = 0; i < order.size(); ++i) {
      const auto& utt = manifest.entries[order[i]].utt_id;
      if (static_cast<int>(i) < n_enroll_utts)
        enroll_map[enroll_id].push_back(utt);
      else
        tests[spk].push_back(utt);
    }
  }

  // same-gender impostor speakers, round-robin
  std::map<std::string, std::vector<std::string>> same_gender;
  for (const auto& [spk, g] : gender_of) same_gender[g].push_back(spk);
  for (const auto& [g, spks] : same_gender)
    if (spks.size() < 2)
      throw InvalidDataError("build_protocol: need at least 2 " + g + " speakers");

  Protocol out;
  out.enroll_map = enroll_map;
  size_t spk_counter = 0;
  for (const auto& [spk, test_utts] : tests) {
    const std::string enroll_id = spk + "-enr";
    const std::string& g = gender_of.at(spk);
    std::vector<std::string> others;
    for (const auto& o : same_gender.at(g))
      if (o != spk) others.push_back(o);

    for (size_t j = 0; j < test_utts.size(); ++j) {
      out.trials.push_back({enroll_id, test_utts[j], true, g});
      const std::string& impostor = others[(j + spk_counter) % others.size()];
      const auto& pool = tests.at(impostor);
      const auto pick = std::uniform_int_distribution<size_t>(0, pool.size() - 1)(rng);
      out.trials.push_back({enroll_id, pool[pick], false, g});
    }
    ++spk_counter;
  }
  return out;
}

}  // namespace dsv
