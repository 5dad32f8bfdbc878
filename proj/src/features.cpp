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

#include "matchbox/features.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "matchbox/error.h"

namespace matchbox {

void FeatureConfig::validate(int sample_rate_hz) const {
  if (sample_rate_hz <= 0) fail(ErrorCode::InvalidConfig, "sample rate must be positive");
  if (!(window_s > 0) || !(hop_s > 0))
    fail(ErrorCode::InvalidConfig, "window and hop must be positive");
  if (n_fft < window_length(sample_rate_hz))
    fail(ErrorCode::InvalidConfig, "n_fft must cover the analysis window");
  if (n_mels < 1 || n_coeffs < 1 || n_coeffs > n_mels)
    fail(ErrorCode::InvalidConfig, "need 1 <= n_coeffs <= n_mels");
  if (!(f_min_hz >= 0) || !(f_max_hz > f_min_hz) || f_max_hz > sample_rate_hz / 2.0)
    fail(ErrorCode::InvalidConfig, "bad filterbank frequency range");
  if (target_frames < 1) fail(ErrorCode::InvalidConfig, "target_frames must be positive");
  if (!(log_floor > 0)) fail(ErrorCode::InvalidConfig, "log_floor must be positive");
}

int FeatureConfig::window_length(int sample_rate_hz) const {
  return static_cast<int>(std::lround(window_s * sample_rate_hz));
}

int FeatureConfig::hop_length(int sample_rate_hz) const {
  return static_cast<int>(std::lround(hop_s * sample_rate_hz));
}

int frame_count(Eigen::Index n_samples, const FeatureConfig& cfg, int sample_rate_hz) {
  const int win = cfg.window_length(sample_rate_hz);
  const int hop = cfg.hop_length(sample_rate_hz);
  if (n_samples < win)
    fail(ErrorCode::ClipTooShort, std::to_string(n_samples) + " samples is shorter than one " +
                                      std::to_string(win) + "-sample window");
  return static_cast<int>((n_samples - win) / hop) + 1;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Eigen::MatrixXd mel_filterbank(const FeatureConfig& cfg, int sample_rate_hz) {
  const int n_bins = cfg.n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.f_min_hz);
  const double mel_hi = hz_to_mel(cfg.f_max_hz);
  Eigen::VectorXd edges_hz(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    edges_hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges_hz[m], center = edges_hz[m + 1], hi = edges_hz[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / cfg.n_fft;
      const double rise = (f - lo) / (center - lo);
      const double fall = (hi - f) / (hi - center);
      fb(m, k) = std::max(0.0, std::min(rise, fall));
    }
  }
  return fb;
}

Eigen::MatrixXd dct_ortho(int n_out, int n_in) {
  Eigen::MatrixXd d(n_out, n_in);
  const double pi = std::numbers::pi;
  for (int k = 0; k < n_out; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n_in) : std::sqrt(2.0 / n_in);
    for (int n = 0; n < n_in; ++n) d(k, n) = scale * std::cos(pi * k * (2.0 * n + 1.0) / (2.0 * n_in));
  }
  return d;
}

Eigen::VectorXd hann_window(int length) {
  Eigen::VectorXd w(length);
  for (int i = 0; i < length; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / length);
  return w;
}

MfccExtractor::MfccExtractor(FeatureConfig cfg, int sample_rate_hz)
    : cfg_(cfg), rate_(sample_rate_hz) {
  cfg_.validate(rate_);
  win_ = cfg_.window_length(rate_);
  hop_ = cfg_.hop_length(rate_);
  window_ = hann_window(win_);
  filterbank_ = mel_filterbank(cfg_, rate_);
  dct_ = dct_ortho(cfg_.n_coeffs, cfg_.n_mels);
}

Eigen::MatrixXd MfccExtractor::power_spectrogram(const AudioClip& clip) const {
  if (clip.sample_rate_hz != rate_)
    fail(ErrorCode::BadArgument, "clip sample rate " + std::to_string(clip.sample_rate_hz) +
                                     " differs from extractor rate " + std::to_string(rate_));
  const int frames = frame_count(clip.samples.size(), cfg_, rate_);
  Eigen::VectorXd signal = clip.samples.cast<double>();
  if (cfg_.preemphasis != 0.0) {
    for (Eigen::Index i = signal.size() - 1; i > 0; --i) signal[i] -= cfg_.preemphasis * signal[i - 1];
  }

  const int n_bins = cfg_.n_fft / 2 + 1;
  Eigen::MatrixXd power(n_bins, frames);
  Eigen::FFT<double> fft;
  std::vector<double> frame(static_cast<std::size_t>(cfg_.n_fft), 0.0);
  std::vector<std::complex<double>> spectrum;
  for (int t = 0; t < frames; ++t) {
    Eigen::Map<Eigen::VectorXd> head(frame.data(), win_);
    head = signal.segment(static_cast<Eigen::Index>(t) * hop_, win_).cwiseProduct(window_);
    fft.fwd(spectrum, frame);
    for (int k = 0; k < n_bins; ++k) power(k, t) = std::norm(spectrum[static_cast<std::size_t>(k)]);
  }
  return power;
}

Eigen::MatrixXd MfccExtractor::mel_energies(const AudioClip& clip) const {
  return filterbank_ * power_spectrogram(clip);
}

Eigen::MatrixXd MfccExtractor::log_mel(const AudioClip& clip) const {
  return (mel_energies(clip).array() + cfg_.log_floor).log().matrix();
}

FeatureMap MfccExtractor::operator()(const AudioClip& clip) const {
  Eigen::MatrixXd cepstra = dct_ * log_mel(clip);
  if (cfg_.normalize_per_feature && cepstra.cols() > 1) {
    const Eigen::VectorXd mean = cepstra.rowwise().mean();
    cepstra.colwise() -= mean;
    const Eigen::VectorXd stdev =
        (cepstra.array().square().rowwise().sum() / static_cast<double>(cepstra.cols() - 1)).sqrt();
    cepstra.array().colwise() /= (stdev.array() + 1e-5);
  }

  // Clips longer than the target keep their centered frames.
  const int valid = static_cast<int>(cepstra.cols());
  const int kept = std::min(valid, cfg_.target_frames);
  const int skip = (valid - kept) / 2;

  FeatureMap fm;
  fm.values = Eigen::MatrixXd::Zero(cfg_.n_coeffs, cfg_.target_frames);
  fm.valid_frames = kept;
  fm.pad_left = (cfg_.target_frames - kept) / 2;
  fm.values.middleCols(fm.pad_left, kept) = cepstra.middleCols(skip, kept);
  return fm;
}

FeatureMap mfcc(const AudioClip& clip, const FeatureConfig& cfg) {
  return MfccExtractor(cfg, clip.sample_rate_hz)(clip);
}

std::vector<std::uint8_t> dump_feature_map(const FeatureMap& fm) {
  std::vector<std::uint8_t> out;
  auto put = [&out](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put(static_cast<std::uint32_t>(fm.coeffs()));
  put(static_cast<std::uint32_t>(fm.frames()));
  put(static_cast<std::uint32_t>(fm.valid_frames));
  for (Eigen::Index r = 0; r < fm.coeffs(); ++r)
    for (Eigen::Index c = 0; c < fm.frames(); ++c)
      put(std::bit_cast<std::uint32_t>(static_cast<float>(fm.values(r, c))));
  return out;
}

FeatureMap load_feature_map_dump(std::span<const std::uint8_t> bytes) {
  auto get = [&bytes](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
    return v;
  };
  if (bytes.size() < 12) fail(ErrorCode::CorruptTensor, "feature dump shorter than its header");
  const std::uint32_t rows = get(0), cols = get(4), valid = get(8);
  if (bytes.size() != 12 + 4ull * rows * cols || valid > cols)
    fail(ErrorCode::CorruptTensor, "feature dump payload does not match its header");
  FeatureMap fm;
  fm.values.resize(rows, cols);
  fm.valid_frames = static_cast<int>(valid);
  fm.pad_left = static_cast<int>((cols - valid) / 2);
  std::size_t at = 12;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c, at += 4)
      fm.values(r, c) = std::bit_cast<float>(get(at));
  return fm;
}

}  // namespace matchbox
