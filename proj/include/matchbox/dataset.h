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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matchbox/audio_io.h"

namespace matchbox {

enum class DatasetVersion { V1, V2, V1Expanded, V2Expanded };

std::string_view to_string(DatasetVersion version);
DatasetVersion parse_dataset_version(std::string_view text);

inline constexpr std::string_view kBackgroundNoise = "background_noise";
inline constexpr std::string_view kBackgroundVoice = "background_voice";
inline constexpr std::string_view kNoiseDirectory = "_background_noise_";

/// Ordered class names; a class index is its position in `names`.
struct LabelSet {
  std::vector<std::string> names;
  DatasetVersion version = DatasetVersion::V2;

  /// The 30 (v1) or 35 (v2) command words in lexicographic order; expanded
  /// versions append background_noise and background_voice.
  static LabelSet for_version(DatasetVersion version);

  LabelSet expanded() const;
  /// Keeps the listed names, in this set's order. Throws UnknownLabel for a
  /// name that is not a member.
  LabelSet subset(std::span<const std::string> keep) const;

  int index_of(std::string_view name) const;
  bool contains(std::string_view name) const;
  int size() const { return static_cast<int>(names.size()); }

  bool operator==(const LabelSet&) const = default;
};

struct ManifestEntry {
  std::string path;
  std::string label;
  double duration_s = 0.0;

  bool operator==(const ManifestEntry&) const = default;
};

using Manifest = std::vector<ManifestEntry>;

struct SplitManifests {
  Manifest train;
  Manifest validation;
  Manifest test;
};

/// Assigns every WAV under the class directories of a Speech Commands root
/// to a split using validation_list.txt and testing_list.txt; unlisted files
/// go to train. Each split is path-sorted.
SplitManifests scan_speech_commands(const std::filesystem::path& root, const LabelSet& labels);

/// Duplicates uniformly drawn entries of each under-represented class until
/// every class reaches the largest class count. When `labels` is given, every
/// one of its classes must be present.
Manifest rebalance(const Manifest& manifest, std::uint64_t seed, const LabelSet* labels = nullptr);

struct SegmentReport {
  int files_ok = 0;
  int files_failed = 0;
  std::int64_t segments = 0;
  std::vector<std::string> failures;
};

/// Splits every WAV under `noise_root` (recursively, path-sorted) into
/// consecutive non-overlapping segments of `segment_s`, dropping the tail.
/// Undecodable files, and files at a rate other than `required_rate_hz` when
/// it is non-zero, are skipped and listed in the report.
std::vector<AudioClip> segment_noise_corpus(const std::filesystem::path& noise_root,
                                            double segment_s = 1.0, SegmentReport* report = nullptr,
                                            int required_rate_hz = 0);

/// Writes clips as WAV files into `dir` and returns them with source_id set
/// to the written path.
std::vector<AudioClip> export_clips(std::span<const AudioClip> clips, const std::filesystem::path& dir,
                                    std::string_view stem);

/// Appends n_noise background_noise and n_speech background_voice entries,
/// sampled without replacement from the pools. Entry paths are the clips'
/// source_id.
Manifest build_expanded_manifest(const Manifest& base, std::span<const AudioClip> noise_clips,
                                 std::span<const AudioClip> speech_clips, std::size_t n_noise,
                                 std::size_t n_speech, std::uint64_t seed);

/// Keeps entries whose label is in `labels`.
Manifest filter_labels(const Manifest& manifest, const LabelSet& labels);

std::map<std::string, std::int64_t> label_histogram(const Manifest& manifest);

std::string manifest_to_jsonl(const Manifest& manifest);
Manifest manifest_from_jsonl(std::string_view text);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

void write_label_set(const LabelSet& labels, const std::filesystem::path& path);
LabelSet read_label_set(const std::filesystem::path& path);

}  // namespace matchbox
