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
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "matchbox/audio_io.h"

namespace matchbox {

struct FeatureConfig {
  double window_s = 0.025;
  double hop_s = 0.010;
  int n_fft = 512;
  int n_mels = 64;
  int n_coeffs = 64;
  double f_min_hz = 0.0;
  double f_max_hz = 8000.0;
  int target_frames = 128;
  double log_floor = 0x1p-24;
  double preemphasis = 0.0;  // 0 disables
  bool normalize_per_feature = false;

  void validate(int sample_rate_hz) const;
  int window_length(int sample_rate_hz) const;
  int hop_length(int sample_rate_hz) const;
};

/// Cepstral feature map, coefficients along rows and frames along columns.
/// Valid frames occupy columns [pad_left, pad_left + valid_frames).
struct FeatureMap {
  Eigen::MatrixXd values;
  int valid_frames = 0;
  int pad_left = 0;

  Eigen::Index coeffs() const { return values.rows(); }
  Eigen::Index frames() const { return values.cols(); }
};

/// floor((n - win) / hop) + 1; throws ClipTooShort when n < win.
int frame_count(Eigen::Index n_samples, const FeatureConfig& cfg, int sample_rate_hz);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular HTK-scale filterbank, n_mels x (n_fft/2 + 1), unnormalized
/// peaks of 1 at the filter centers.
Eigen::MatrixXd mel_filterbank(const FeatureConfig& cfg, int sample_rate_hz);

/// Orthonormal DCT-II matrix (n_out x n_in). Its transpose is the inverse
/// when n_out == n_in.
Eigen::MatrixXd dct_ortho(int n_out, int n_in);

/// Periodic Hann window.
Eigen::VectorXd hann_window(int length);

/// Reusable front end; precomputes window, filterbank and DCT basis.
class MfccExtractor {
 public:
  explicit MfccExtractor(FeatureConfig cfg = {}, int sample_rate_hz = kCanonicalSampleRate);

  /// Power spectrogram, (n_fft/2 + 1) x frames.
  Eigen::MatrixXd power_spectrogram(const AudioClip& clip) const;
  /// Mel filterbank energies, n_mels x frames.
  Eigen::MatrixXd mel_energies(const AudioClip& clip) const;
  /// log(mel + log_floor), n_mels x frames.
  Eigen::MatrixXd log_mel(const AudioClip& clip) const;
  /// Full pipeline including symmetric zero padding to target_frames.
  FeatureMap operator()(const AudioClip& clip) const;

  const FeatureConfig& config() const { return cfg_; }
  const Eigen::MatrixXd& filterbank() const { return filterbank_; }
  const Eigen::MatrixXd& dct() const { return dct_; }

 private:
  FeatureConfig cfg_;
  int rate_;
  int win_;
  int hop_;
  Eigen::VectorXd window_;
  Eigen::MatrixXd filterbank_;
  Eigen::MatrixXd dct_;
};

FeatureMap mfcc(const AudioClip& clip, const FeatureConfig& cfg = {});

/// Debug dump: three little-endian u32 (coeffs, frames, valid_frames)
/// followed by coeffs*frames little-endian f32 values in row-major order.
std::vector<std::uint8_t> dump_feature_map(const FeatureMap& fm);
FeatureMap load_feature_map_dump(std::span<const std::uint8_t> bytes);

}  // namespace matchbox
