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

#include <map>
#include <string>
#include <thread>
#include <vector>

#include "dsv/fbank.hpp"
#include "dsv/manifest.hpp"
#include "dsv/model.hpp"
#include "dsv/ssl_provider.hpp"
#include "dsv/wav_io.hpp"

namespace dsv {

// Per-utterance feature cache. Features are pure functions of the audio, so
// worker parallelism cannot change the result: each worker fills disjoint
// slots of a preallocated vector.
class FeatureCache {
 public:
  static FeatureCache build(const Manifest& manifest, const FbankConfig& fbank_cfg,
                            const SslProvider* provider, bool need_fbank, bool need_ssl,
                            int workers = 1) {
    if (need_ssl && provider == nullptr)
      throw InvalidConfigError("feature cache: SSL stream requested without a provider");
    FeatureCache out;
    const size_t n = manifest.entries.size();
    std::vector<UttFeatures> slots(n);
    std::vector<std::exception_ptr> errors(static_cast<size_t>(std::max(1, workers)));

    auto work = [&](size_t worker, size_t stride) {
      try {
        for (size_t i = worker; i < n; i += stride) {
          const auto& e = manifest.entries[i];
          const Waveform wav = read_wav(manifest.resolve_path(e));
          if (need_fbank) slots[i].fbank = compute_fbank(wav, fbank_cfg);
          if (need_ssl) slots[i].stack = ssl_layer_stack(wav, *provider, e.utt_id);
        }
      } catch (...) {
        errors[worker] = std::current_exception();
      }
    };

    const auto stride = static_cast<size_t>(std::max(1, workers));
    if (stride == 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> threads;
      for (size_t w = 0; w < stride; ++w) threads.emplace_back(work, w, stride);
      for (auto& t : threads) t.join();
    }
    for (const auto& err : errors)
      if (err) std::rethrow_exception(err);

    for (size_t i = 0; i < n; ++i)
      out.features_.emplace(manifest.entries[i].utt_id, std::move(slots[i]));
    return out;
  }

  const UttFeatures& at(const std::string& utt_id) const {
    auto it = features_.find(utt_id);
    if (it == features_.end()) throw LookupError("no cached features for '" + utt_id + "'");
    return it->second;
  }

  bool contains(const std::string& utt_id) const { return features_.count(utt_id) > 0; }
  size_t size() const { return features_.size(); }

 private:
  std::map<std::string, UttFeatures> features_;
};

// Sorted-speaker label map shared by training and any resumed run.
inline std::map<std::string, int> speaker_labels(const Manifest& manifest) {
  std::map<std::string, int> out;
  int next = 0;
  for (const auto& spk : manifest.speakers()) out[spk] = next++;
  return out;
}

}  // namespace dsv
