// emofuse/audio/specaugment.hpp

// Copyright 2026  Emofuse Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef EMOFUSE_AUDIO_SPECAUGMENT_HPP_
#define EMOFUSE_AUDIO_SPECAUGMENT_HPP_

#include <atomic>
#include <cmath>
#include <string>
#include <vector>

#include "emofuse/audio/frontend.hpp"
#include "emofuse/common.hpp"

namespace emofuse::audio {

struct AugmentPolicy {
  std::string name;
  int n_freq_masks = 0;
  int max_freq_width = 0;     // mel bins
  int n_time_masks = 0;
  double max_time_frac = 0.0;  // fraction of the segment's frames
  float mask_value = 0.0f;

  void validate(int n_mels) const {
    if (n_freq_masks < 0 || n_time_masks < 0)
      throw std::invalid_argument("augment policy '" + name + "': negative mask count");
    if (max_freq_width < 0 || max_freq_width > n_mels)
      throw std::invalid_argument("augment policy '" + name + "': max_freq_width " +
                                  std::to_string(max_freq_width) + " outside [0, " +
                                  std::to_string(n_mels) + "]");
    if (max_time_frac < 0.0 || max_time_frac > 1.0)
      throw std::invalid_argument("augment policy '" + name + "': max_time_frac " +
                                  std::to_string(max_time_frac) + " outside [0, 1]");
  }
};

inline AugmentPolicy conservative_policy() {
  return AugmentPolicy{"conservative", 2, 8, 2, 0.05, 0.0f};
}

inline AugmentPolicy aggressive_policy() {
  return AugmentPolicy{"aggressive", 2, 16, 2, 0.10, 0.0f};
}

inline AugmentPolicy policy_by_name(const std::string& name) {
  if (name == "conservative") return conservative_policy();
  if (name == "aggressive") return aggressive_policy();
  throw std::invalid_argument("unknown augment policy '" + name +
                              "' (expected conservative or aggressive)");
}

// Counts every apply_masks call so evaluation paths can assert that no
// augmentation ever ran while they were scoring.
inline std::atomic<std::uint64_t>& augment_call_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

// Masks stripes of mel bins and frames. Requires a normalized spectrogram so
// that mask_value 0 coincides with the per-bin mean.
inline LogMelSpectrogram apply_masks(const LogMelSpectrogram& spec,
                                     const AugmentPolicy& policy, Rng& rng) {
  if (!spec.normalized)
    throw std::invalid_argument("apply_masks: segment '" + spec.segment_id +
                                "' must be normalized before augmentation");
  policy.validate(spec.n_mels);
  augment_call_counter().fetch_add(1, std::memory_order_relaxed);

  LogMelSpectrogram out = spec;
  for (int k = 0; k < policy.n_freq_masks; ++k) {
    const int f = static_cast<int>(rng.uniform_int(0, policy.max_freq_width));
    const int f0 = static_cast<int>(rng.uniform_int(0, spec.n_mels - f));
    for (std::int64_t t = 0; t < spec.n_frames; ++t)
      for (int m = f0; m < f0 + f; ++m) out.at(t, m) = policy.mask_value;
  }
  const int max_t = static_cast<int>(std::lround(policy.max_time_frac *
                                                 static_cast<double>(spec.n_frames)));
  for (int k = 0; k < policy.n_time_masks; ++k) {
    const int w = static_cast<int>(rng.uniform_int(0, max_t));
    const std::int64_t t0 = rng.uniform_int(0, spec.n_frames - w);
    for (std::int64_t t = t0; t < t0 + w; ++t)
      for (int m = 0; m < spec.n_mels; ++m) out.at(t, m) = policy.mask_value;
  }
  return out;
}

// Expands a batch to originals plus `copies` masked variants each, grouped per
// input with the original first.
inline std::vector<LogMelSpectrogram> augment_batch(
    const std::vector<LogMelSpectrogram>& specs, const AugmentPolicy& policy, int copies,
    Rng& rng) {
  if (copies < 0) throw std::invalid_argument("augment_batch: copies must be >= 0");
  std::vector<LogMelSpectrogram> out;
  out.reserve(specs.size() * (1 + copies));
  for (const auto& s : specs) {
    out.push_back(s);
    for (int c = 0; c < copies; ++c) out.push_back(apply_masks(s, policy, rng));
  }
  return out;
}

}  // namespace emofuse::audio

#endif  // EMOFUSE_AUDIO_SPECAUGMENT_HPP_
