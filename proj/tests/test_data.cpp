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

#include <set>

#include "dsv/manifest.hpp"
#include "dsv/protocol.hpp"
#include "testutil.hpp"

using dsv::Manifest;
using dsv::ManifestEntry;
using dsv::Protocol;

namespace {

// n_speakers speakers (genders alternate), n_utts utterances each, fake paths
Manifest fake_manifest(int n_speakers, int n_utts) {
  Manifest m;
  for (int s = 0; s < n_speakers; ++s) {
    char spk[16];
    std::snprintf(spk, sizeof(spk), "spk%03d", s);
    for (int u = 0; u < n_utts; ++u) {
      char utt[32];
      std::snprintf(utt, sizeof(utt), "%s_utt%03d", spk, u);
      m.entries.push_back(
          {utt, spk, s % 2 == 0 ? "female" : "male", std::string("wavs/") + utt + ".wav", ""});
    }
  }
  return m;
}

}  // namespace

TEST_CASE("manifest round-trips losslessly") {
  testutil::TempDir tmp("manifest");
  Manifest m = fake_manifest(3, 2);
  m.entries[1].transform_id = "ps088";
  const auto path = tmp.file("manifest.txt");
  m.write(path);
  Manifest back = Manifest::read(path);
  REQUIRE(back.entries.size() == m.entries.size());
  for (size_t i = 0; i < m.entries.size(); ++i) {
    REQUIRE(back.entries[i].utt_id == m.entries[i].utt_id);
    REQUIRE(back.entries[i].speaker_id == m.entries[i].speaker_id);
    REQUIRE(back.entries[i].gender == m.entries[i].gender);
    REQUIRE(back.entries[i].path == m.entries[i].path);
    REQUIRE(back.entries[i].transform_id == m.entries[i].transform_id);
  }
  REQUIRE(back.base_dir == tmp.path.string());
}

TEST_CASE("manifest validation rejects duplicates and bad fields") {
  Manifest dup = fake_manifest(2, 2);
  dup.entries[1].utt_id = dup.entries[0].utt_id;
  REQUIRE_THROWS_AS(dup.validate(), dsv::InvalidDataError);

  Manifest badg = fake_manifest(2, 2);
  badg.entries[0].gender = "unknown";
  REQUIRE_THROWS_AS(badg.validate(), dsv::InvalidDataError);

  testutil::TempDir tmp("manifest_bad");
  const auto path = tmp.file("bad.txt");
  {
    std::ofstream f(path);
    f << "utt1 spk1 female wavs/a.wav - extra\n";
  }
  REQUIRE_THROWS_AS(Manifest::read(path), dsv::InvalidDataError);
}

TEST_CASE("protocol splits enrollment and test utterances disjointly") {
  Manifest m = fake_manifest(6, 8);
  Protocol p = dsv::build_protocol(m, 3, 5);

  std::set<std::string> enroll_utts;
  for (const auto& [id, utts] : p.enroll_map) {
    REQUIRE(utts.size() == 3);
    for (const auto& u : utts) enroll_utts.insert(u);
  }
  for (const auto& t : p.trials) REQUIRE(enroll_utts.count(t.test_utt_id) == 0);
}

TEST_CASE("protocol balances target and nontarget trials") {
  Manifest m = fake_manifest(8, 6);
  Protocol p = dsv::build_protocol(m, 2, 9);
  int targets = 0, nontargets = 0;
  for (const auto& t : p.trials) (t.target ? targets : nontargets)++;
  REQUIRE(targets == nontargets);
  REQUIRE(targets == 8 * 4);  // every held-out utt appears as a target trial
}

TEST_CASE("nontarget trials pair same-gender speakers") {
  Manifest m = fake_manifest(6, 5);
  Protocol p = dsv::build_protocol(m, 2, 3);
  std::map<std::string, std::string> spk_gender;
  for (const auto& e : m.entries) spk_gender[e.speaker_id] = e.gender;
  std::map<std::string, std::string> utt_spk;
  for (const auto& e : m.entries) utt_spk[e.utt_id] = e.speaker_id;
  for (const auto& t : p.trials) {
    const std::string enroll_spk = t.enroll_id.substr(0, t.enroll_id.size() - 4);
    REQUIRE(spk_gender.at(utt_spk.at(t.test_utt_id)) == spk_gender.at(enroll_spk));
    REQUIRE(t.gender == spk_gender.at(enroll_spk));
    if (t.target)
      REQUIRE(utt_spk.at(t.test_utt_id) == enroll_spk);
    else
      REQUIRE(utt_spk.at(t.test_utt_id) != enroll_spk);
  }
}

TEST_CASE("protocol generation is deterministic in the seed") {
  Manifest m = fake_manifest(6, 6);
  Protocol a = dsv::build_protocol(m, 2, 42);
  Protocol b = dsv::build_protocol(m, 2, 42);
  REQUIRE(a.trials.size() == b.trials.size());
  for (size_t i = 0; i < a.trials.size(); ++i) {
    REQUIRE(a.trials[i].enroll_id == b.trials[i].enroll_id);
    REQUIRE(a.trials[i].test_utt_id == b.trials[i].test_utt_id);
    REQUIRE(a.trials[i].target == b.trials[i].target);
  }
  Protocol c = dsv::build_protocol(m, 2, 43);
  bool any_diff = false;
  for (size_t i = 0; i < a.trials.size() && i < c.trials.size(); ++i)
    if (a.trials[i].test_utt_id != c.trials[i].test_utt_id) any_diff = true;
  REQUIRE(any_diff);
}

TEST_CASE("protocol rejects speakers with too few utterances") {
  Manifest m = fake_manifest(4, 3);
  REQUIRE_THROWS_AS(dsv::build_protocol(m, 3, 1), dsv::InvalidDataError);
  REQUIRE_THROWS_AS(dsv::build_protocol(Manifest{}, 1, 1), dsv::InvalidDataError);
}

TEST_CASE("protocol requires two speakers per gender") {
  Manifest m = fake_manifest(2, 5);  // one female, one male
  REQUIRE_THROWS_AS(dsv::build_protocol(m, 2, 1), dsv::InvalidDataError);
}

TEST_CASE("trial and enroll-map files round-trip") {
  testutil::TempDir tmp("protocol_io");
  Manifest m = fake_manifest(4, 5);
  Protocol p = dsv::build_protocol(m, 2, 7);

  dsv::write_trials(tmp.file("trials.txt"), p.trials);
  const auto trials = dsv::read_trials(tmp.file("trials.txt"));
  REQUIRE(trials.size() == p.trials.size());
  for (size_t i = 0; i < trials.size(); ++i) {
    REQUIRE(trials[i].enroll_id == p.trials[i].enroll_id);
    REQUIRE(trials[i].test_utt_id == p.trials[i].test_utt_id);
    REQUIRE(trials[i].target == p.trials[i].target);
    REQUIRE(trials[i].gender == p.trials[i].gender);
  }

  dsv::write_enroll_map(tmp.file("enroll.txt"), p.enroll_map);
  REQUIRE(dsv::read_enroll_map(tmp.file("enroll.txt")) == p.enroll_map);
}
