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

#include "matchbox/augment.h"

#include <algorithm>
#include <cmath>

#include "matchbox/error.h"
#include "matchbox/random.h"

namespace matchbox {

namespace {

template <typename T>
void check_range(const Range<T>& r, const char* name) {
  if (!(r.lo <= r.hi)) fail(ErrorCode::InvalidConfig, std::string(name) + ": lower bound exceeds upper");
}

double rms(const Eigen::Ref<const Eigen::VectorXf>& x) {
  if (x.size() == 0) return 0.0;
  return std::sqrt(x.cast<double>().squaredNorm() / static_cast<double>(x.size()));
}

// Sub-stream tags so each transform draws from its own generator.
enum Stream : std::uint64_t { kShift = 1, kWhite, kBackground, kSpec, kCutout };

}  // namespace

void AugmentConfig::validate() const {
  check_range(time_shift_ms, "time_shift_ms");
  check_range(white_noise_db, "white_noise_db");
  check_range(spec_time_width, "spec_time_width");
  check_range(spec_freq_width, "spec_freq_width");
  check_range(cutout_time, "cutout_time");
  check_range(cutout_freq, "cutout_freq");
  check_range(bg_snr_db, "bg_snr_db");
  if (spec_time_masks < 0 || spec_freq_masks < 0 || cutout_rects < 0)
    fail(ErrorCode::InvalidConfig, "mask counts must be non-negative");
  if (spec_time_width.lo < 0 || spec_freq_width.lo < 0 || cutout_time.lo < 0 || cutout_freq.lo < 0)
    fail(ErrorCode::InvalidConfig, "mask widths must be non-negative");
}

AugmentConfig AugmentConfig::none() {
  AugmentConfig cfg;
  cfg.time_shift = cfg.white_noise = cfg.spec_augment = cfg.spec_cutout = false;
  cfg.background_noise = false;
  return cfg;
}

AudioClip time_shift(const AudioClip& clip, double shift_ms) {
  const auto shift = static_cast<Eigen::Index>(std::llround(shift_ms * clip.sample_rate_hz / 1000.0));
  const Eigen::Index n = clip.samples.size();
  AudioClip out = clip;
  if (shift == 0) return out;
  out.samples.setZero();
  const Eigen::Index keep = n - std::min<Eigen::Index>(n, std::abs(shift));
  if (keep == 0) return out;
  if (shift > 0)
    out.samples.tail(keep) = clip.samples.head(keep);
  else
    out.samples.head(keep) = clip.samples.tail(keep);
  return out;
}

AudioClip add_white_noise(const AudioClip& clip, double level_db, std::uint64_t seed) {
  AudioClip out = clip;
  if (std::isinf(level_db) && level_db < 0) return out;
  const double sigma = std::pow(10.0, level_db / 20.0);
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (Eigen::Index i = 0; i < out.samples.size(); ++i)
    out.samples[i] = static_cast<float>(std::clamp(out.samples[i] + gauss(rng), -1.0, 1.0));
  return out;
}

MixResult mix_at_snr_detailed(const AudioClip& clip, const AudioClip& noise, double snr_db,
                              OffsetPolicy policy, std::uint64_t seed) {
  if (clip.sample_rate_hz != noise.sample_rate_hz)
    fail(ErrorCode::BadArgument, "clip and noise sample rates differ");
  const Eigen::Index n = clip.samples.size();
  MixResult result;
  result.mixed = clip;
  result.scaled_noise = Eigen::VectorXf::Zero(n);
  if (std::isinf(snr_db) && snr_db > 0) return result;

  if (rms(clip.samples) == 0.0) fail(ErrorCode::SilentSignal, "clip " + clip.source_id + " is silent");
  if (rms(noise.samples) == 0.0) fail(ErrorCode::SilentNoise, "noise " + noise.source_id + " is silent");

  Rng rng(seed);
  const Eigen::Index covered = std::min(n, noise.samples.size());
  Eigen::Index clip_offset = 0;
  Eigen::Index noise_offset = 0;
  if (policy == OffsetPolicy::Random) {
    const Eigen::Index slack = std::max(n, noise.samples.size()) - covered;
    const auto pick = static_cast<Eigen::Index>(
        std::uniform_int_distribution<long long>(0, static_cast<long long>(slack))(rng));
    (noise.samples.size() < n ? clip_offset : noise_offset) = pick;
  }

  const auto window = noise.samples.segment(noise_offset, covered);
  const double signal_rms = rms(clip.samples.segment(clip_offset, covered));
  const double noise_rms = rms(window);
  if (signal_rms == 0.0)
    fail(ErrorCode::SilentSignal, "clip " + clip.source_id + " is silent over the noise-covered region");
  if (noise_rms == 0.0) fail(ErrorCode::SilentNoise, "noise " + noise.source_id + " window is silent");

  const double gain = signal_rms / (noise_rms * std::pow(10.0, snr_db / 20.0));
  result.gain = gain;
  result.offset = clip_offset;
  result.covered = covered;
  result.scaled_noise.segment(clip_offset, covered) = (window.cast<double>() * gain).cast<float>();
  result.mixed.samples = (clip.samples + result.scaled_noise).cwiseMax(-1.0f).cwiseMin(1.0f);
  return result;
}

AudioClip mix_at_snr(const AudioClip& clip, const AudioClip& noise, double snr_db,
                     OffsetPolicy policy, std::uint64_t seed) {
  return mix_at_snr_detailed(clip, noise, snr_db, policy, seed).mixed;
}

std::vector<MaskRect> draw_spec_augment_masks(const AugmentConfig& cfg, int rows, int cols,
                                              std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MaskRect> masks;
  for (int i = 0; i < cfg.spec_time_masks; ++i) {
    const int w = std::min(cols, uniform_int(rng, cfg.spec_time_width.lo, cfg.spec_time_width.hi));
    const int t0 = uniform_int(rng, 0, cols - w);
    masks.push_back({0, rows, t0, w});
  }
  for (int i = 0; i < cfg.spec_freq_masks; ++i) {
    const int h = std::min(rows, uniform_int(rng, cfg.spec_freq_width.lo, cfg.spec_freq_width.hi));
    const int f0 = uniform_int(rng, 0, rows - h);
    masks.push_back({f0, h, 0, cols});
  }
  return masks;
}

std::vector<MaskRect> draw_cutout_masks(const AugmentConfig& cfg, int rows, int cols,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MaskRect> masks;
  for (int i = 0; i < cfg.cutout_rects; ++i) {
    const int w = std::min(cols, uniform_int(rng, cfg.cutout_time.lo, cfg.cutout_time.hi));
    const int h = std::min(rows, uniform_int(rng, cfg.cutout_freq.lo, cfg.cutout_freq.hi));
    const int t0 = uniform_int(rng, 0, cols - w);
    const int f0 = uniform_int(rng, 0, rows - h);
    masks.push_back({f0, h, t0, w});
  }
  return masks;
}

void apply_masks(FeatureMap& fm, std::span<const MaskRect> masks) {
  for (const MaskRect& m : masks) {
    if (m.rows > 0 && m.cols > 0) fm.values.block(m.row0, m.col0, m.rows, m.cols).setZero();
  }
}

FeatureMap spec_augment(const FeatureMap& fm, const AugmentConfig& cfg, std::uint64_t seed) {
  FeatureMap out = fm;
  apply_masks(out, draw_spec_augment_masks(cfg, static_cast<int>(fm.coeffs()),
                                           static_cast<int>(fm.frames()), seed));
  return out;
}

FeatureMap spec_cutout(const FeatureMap& fm, const AugmentConfig& cfg, std::uint64_t seed) {
  FeatureMap out = fm;
  apply_masks(out, draw_cutout_masks(cfg, static_cast<int>(fm.coeffs()),
                                     static_cast<int>(fm.frames()), seed));
  return out;
}

AudioClip augment_waveform(const AudioClip& clip, const AugmentConfig& cfg, std::uint64_t seed,
                           std::span<const AudioClip> noise_pool) {
  AudioClip out = clip;
  if (cfg.time_shift) {
    Rng rng(derive_seed(seed, {kShift}));
    const double ms =
        std::uniform_real_distribution<double>(cfg.time_shift_ms.lo, cfg.time_shift_ms.hi)(rng);
    out = time_shift(out, ms);
  }
  if (cfg.white_noise) {
    Rng rng(derive_seed(seed, {kWhite}));
    const double db =
        std::uniform_real_distribution<double>(cfg.white_noise_db.lo, cfg.white_noise_db.hi)(rng);
    out = add_white_noise(out, db, rng());
  }
  if (cfg.background_noise && !noise_pool.empty()) {
    Rng rng(derive_seed(seed, {kBackground}));
    const auto pick = std::uniform_int_distribution<std::size_t>(0, noise_pool.size() - 1)(rng);
    const double snr = std::uniform_real_distribution<double>(cfg.bg_snr_db.lo, cfg.bg_snr_db.hi)(rng);
    try {
      out = mix_at_snr(out, noise_pool[pick], snr, OffsetPolicy::Random, rng());
    } catch (const Error& e) {
      // No defined SNR for silent inputs; the clip passes through unmixed.
      if (e.code() != ErrorCode::SilentSignal && e.code() != ErrorCode::SilentNoise) throw;
    }
  }
  return out;
}

FeatureMap augment_features(const FeatureMap& fm, const AugmentConfig& cfg, std::uint64_t seed) {
  FeatureMap out = fm;
  const int rows = static_cast<int>(fm.coeffs());
  const int cols = static_cast<int>(fm.frames());
  if (cfg.spec_augment) apply_masks(out, draw_spec_augment_masks(cfg, rows, cols, derive_seed(seed, {kSpec})));
  if (cfg.spec_cutout) apply_masks(out, draw_cutout_masks(cfg, rows, cols, derive_seed(seed, {kCutout})));
  return out;
}

}  // namespace matchbox
