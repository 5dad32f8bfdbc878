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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace matchbox {

inline constexpr int kCanonicalSampleRate = 16000;

/// Mono waveform with amplitudes in [-1, 1].
struct AudioClip {
  Eigen::VectorXf samples;
  int sample_rate_hz = kCanonicalSampleRate;
  std::optional<std::string> label;
  std::string source_id;

  Eigen::Index size() const { return samples.size(); }
  double duration_seconds() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Decodes a RIFF/WAVE PCM16 mono container. Samples are int16 / 32768.
/// Unknown chunks before or after `data` are skipped.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);

/// Encodes as canonical 44-byte-header PCM16 mono. Amplitudes are scaled by
/// 32768, rounded, and saturated to the int16 range.
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);

struct WavInfo {
  int sample_rate_hz = 0;
  std::int64_t num_samples = 0;
  double duration_seconds() const { return static_cast<double>(num_samples) / sample_rate_hz; }
};

/// Reads only the header chunks of a file and applies the same validation
/// as decode_wav.
WavInfo probe_wav(const std::filesystem::path& path);

AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const AudioClip& clip, const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

/// Zero-pads symmetrically (extra zero on the right) or center-crops to
/// exactly round(seconds * sample_rate) samples.
AudioClip fit_to_duration(const AudioClip& clip, double seconds);

}  // namespace matchbox
