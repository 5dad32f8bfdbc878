// Copyright 2026 The Matchbox Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "matchbox/audio_io.h"
#include "matchbox/features.h"

namespace matchbox {

template <typename T>
struct Range {
  T lo{};
  T hi{};
};

struct AugmentConfig {
  bool time_shift = true;
  Range<double> time_shift_ms{-5.0, 5.0};

  bool white_noise = true;
  Range<double> white_noise_db{-90.0, -46.0};

  bool spec_augment = true;
  int spec_time_masks = 2;
  Range<int> spec_time_width{0, 25};
  int spec_freq_masks = 2;
  Range<int> spec_freq_width{0, 15};

  bool spec_cutout = true;
  int cutout_rects = 5;
  Range<int> cutout_time{0, 25};
  Range<int> cutout_freq{0, 15};

  bool background_noise = false;
  Range<double> bg_snr_db{0.0, 50.0};

  void validate() const;

  /// Every transform switched off.
  static AugmentConfig none();
};

/// Delays (positive) or advances (negative) the waveform by
/// round(shift_ms * rate / 1000) samples, zero filling the vacated end.
AudioClip time_shift(const AudioClip& clip, double shift_ms);

/// Adds Gaussian noise with RMS 10^(level_db/20) relative to full scale and
/// clamps to [-1, 1]. A level of -inf is the identity.
AudioClip add_white_noise(const AudioClip& clip, double level_db, std::uint64_t seed);

enum class OffsetPolicy { Random, Start };

struct MixResult {
  AudioClip mixed;
  /// Scaled noise aligned to the clip, zero outside the covered region.
  Eigen::VectorXf scaled_noise;
  Eigen::Index offset = 0;
  Eigen::Index covered = 0;
  double gain = 0.0;
};

/// Mixes `noise` into `clip` so that the RMS ratio over the covered region
/// equals snr_db. A shorter noise covers a sub-segment at an offset chosen by
/// the policy; a longer noise contributes a clip-length window. snr_db = +inf
/// returns the clip untouched.
MixResult mix_at_snr_detailed(const AudioClip& clip, const AudioClip& noise, double snr_db,
                              OffsetPolicy policy, std::uint64_t seed);
AudioClip mix_at_snr(const AudioClip& clip, const AudioClip& noise, double snr_db,
                     OffsetPolicy policy, std::uint64_t seed);

struct MaskRect {
  int row0 = 0;
  int rows = 0;
  int col0 = 0;
  int cols = 0;
};

/// Time masks span every row, frequency masks every column.
std::vector<MaskRect> draw_spec_augment_masks(const AugmentConfig& cfg, int rows, int cols,
                                              std::uint64_t seed);
std::vector<MaskRect> draw_cutout_masks(const AugmentConfig& cfg, int rows, int cols,
                                        std::uint64_t seed);
void apply_masks(FeatureMap& fm, std::span<const MaskRect> masks);

FeatureMap spec_augment(const FeatureMap& fm, const AugmentConfig& cfg, std::uint64_t seed);
FeatureMap spec_cutout(const FeatureMap& fm, const AugmentConfig& cfg, std::uint64_t seed);

/// Waveform stage of the training recipe: time shift, white noise, then an
/// optional background mix drawn from `noise_pool`.
AudioClip augment_waveform(const AudioClip& clip, const AugmentConfig& cfg, std::uint64_t seed,
                           std::span<const AudioClip> noise_pool = {});

/// Feature stage: SpecAugment followed by SpecCutout.
FeatureMap augment_features(const FeatureMap& fm, const AugmentConfig& cfg, std::uint64_t seed);

}  // namespace matchbox
