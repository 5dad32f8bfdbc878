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

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "matchbox/audio_io.h"

namespace matchbox::testing {

/// Hand-assembled RIFF/WAVE bytes, independent of encode_wav.
inline std::vector<std::uint8_t> reference_wav(const std::vector<std::int16_t>& pcm, std::uint32_t rate = 16000,
                                               std::uint16_t channels = 1, std::uint16_t bits = 16,
                                               std::uint16_t format = 1, std::uint32_t declared_data = 0xFFFFFFFF) {
  std::vector<std::uint8_t> b;
  auto u32 = [&b](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  };
  auto u16 = [&b](std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v & 0xff));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  auto tag = [&b](const char* t) { b.insert(b.end(), t, t + 4); };
  const auto data_bytes = static_cast<std::uint32_t>(pcm.size() * 2);
  tag("RIFF");
  u32(36 + data_bytes);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(format);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  tag("data");
  u32(declared_data == 0xFFFFFFFF ? data_bytes : declared_data);
  for (auto s : pcm) u16(static_cast<std::uint16_t>(s));
  return b;
}

inline AudioClip tone(double hz, double seconds = 1.0, double amplitude = 0.5, int rate = 16000) {
  AudioClip clip;
  clip.sample_rate_hz = rate;
  const auto n = static_cast<Eigen::Index>(std::llround(seconds * rate));
  clip.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    clip.samples[i] = static_cast<float>(amplitude * std::sin(2.0 * std::numbers::pi * hz * i / rate));
  return clip;
}

inline AudioClip gaussian_clip(std::uint64_t seed, double sigma = 0.1, Eigen::Index n = 16000, int rate = 16000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  AudioClip clip;
  clip.sample_rate_hz = rate;
  clip.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) clip.samples[i] = static_cast<float>(std::clamp(g(rng), -1.0, 1.0));
  return clip;
}

/// Two-class toy corpus: label 0 is a steady tone, label 1 white noise.
/// Amplitude, pitch and noise seed vary per clip.
inline void two_class_corpus(int per_class, std::uint64_t seed, std::vector<AudioClip>& clips,
                             std::vector<int>& labels) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.1, 0.5), pitch(300.0, 600.0);
  for (int i = 0; i < per_class; ++i) {
    clips.push_back(tone(pitch(rng), 1.0, amp(rng)));
    labels.push_back(0);
    clips.push_back(gaussian_clip(rng(), amp(rng) / 2));
    labels.push_back(1);
  }
}

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("matchbox_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace matchbox::testing
