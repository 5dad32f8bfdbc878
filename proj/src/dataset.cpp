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

#include "matchbox/dataset.h"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "matchbox/error.h"
#include "matchbox/random.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace matchbox {

namespace {

const std::vector<std::string>& v1_words() {
  static const std::vector<std::string> words = {
      "bed",   "bird", "cat",  "dog",  "down",  "eight", "five",  "four", "go",    "happy",
      "house", "left", "marvin", "nine", "no",  "off",   "on",    "one",  "right", "seven",
      "sheila", "six", "stop", "three", "tree", "two",   "up",    "wow",  "yes",   "zero"};
  return words;
}

const std::vector<std::string>& v2_extra_words() {
  static const std::vector<std::string> words = {"backward", "follow", "forward", "learn", "visual"};
  return words;
}

bool is_wav(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

std::unordered_set<std::string> read_list(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::MissingListFile, "missing " + path.string());
  std::unordered_set<std::string> entries;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) entries.insert(line);
  }
  return entries;
}

void sort_by_path(Manifest& m) {
  std::sort(m.begin(), m.end(), [](const ManifestEntry& a, const ManifestEntry& b) {
    return std::tie(a.path, a.label) < std::tie(b.path, b.label);
  });
}

}  // namespace

std::string_view to_string(DatasetVersion version) {
  switch (version) {
    case DatasetVersion::V1: return "v1";
    case DatasetVersion::V2: return "v2";
    case DatasetVersion::V1Expanded: return "v1_expanded";
    case DatasetVersion::V2Expanded: return "v2_expanded";
  }
  return "v2";
}

DatasetVersion parse_dataset_version(std::string_view text) {
  if (text == "v1") return DatasetVersion::V1;
  if (text == "v2") return DatasetVersion::V2;
  if (text == "v1_expanded") return DatasetVersion::V1Expanded;
  if (text == "v2_expanded") return DatasetVersion::V2Expanded;
  fail(ErrorCode::InvalidConfig, "unknown dataset version '" + std::string(text) + "'");
}

LabelSet LabelSet::for_version(DatasetVersion version) {
  LabelSet set;
  set.names = v1_words();
  const bool v2 = version == DatasetVersion::V2 || version == DatasetVersion::V2Expanded;
  if (v2) {
    set.names.insert(set.names.end(), v2_extra_words().begin(), v2_extra_words().end());
    std::sort(set.names.begin(), set.names.end());
  }
  set.version = v2 ? DatasetVersion::V2 : DatasetVersion::V1;
  if (version == DatasetVersion::V1Expanded || version == DatasetVersion::V2Expanded) return set.expanded();
  return set;
}

LabelSet LabelSet::expanded() const {
  if (version == DatasetVersion::V1Expanded || version == DatasetVersion::V2Expanded) return *this;
  LabelSet out = *this;
  out.names.emplace_back(kBackgroundNoise);
  out.names.emplace_back(kBackgroundVoice);
  out.version = version == DatasetVersion::V1 ? DatasetVersion::V1Expanded : DatasetVersion::V2Expanded;
  return out;
}

LabelSet LabelSet::subset(std::span<const std::string> keep) const {
  for (const auto& name : keep)
    if (!contains(name)) fail(ErrorCode::UnknownLabel, "'" + name + "' is not in the label set");
  LabelSet out;
  out.version = version;
  for (const auto& name : names)
    if (std::find(keep.begin(), keep.end(), name) != keep.end()) out.names.push_back(name);
  return out;
}

int LabelSet::index_of(std::string_view name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) fail(ErrorCode::UnknownLabel, "'" + std::string(name) + "' is not in the label set");
  return static_cast<int>(it - names.begin());
}

bool LabelSet::contains(std::string_view name) const {
  return std::find(names.begin(), names.end(), name) != names.end();
}

SplitManifests scan_speech_commands(const fs::path& root, const LabelSet& labels) {
  const auto validation = read_list(root / "validation_list.txt");
  const auto testing = read_list(root / "testing_list.txt");

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name == kNoiseDirectory || name.starts_with('.')) continue;
    if (!labels.contains(name))
      fail(ErrorCode::UnknownClassDirectory, "directory '" + name + "' is not a class of " +
                                                 std::string(to_string(labels.version)));
    class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());

  SplitManifests splits;
  for (const auto& dir : class_dirs) {
    const std::string label = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && is_wav(entry.path())) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      const std::string rel = label + "/" + file.filename().string();
      ManifestEntry e{file.string(), label, probe_wav(file).duration_seconds()};
      if (testing.contains(rel))
        splits.test.push_back(std::move(e));
      else if (validation.contains(rel))
        splits.validation.push_back(std::move(e));
      else
        splits.train.push_back(std::move(e));
    }
  }
  sort_by_path(splits.train);
  sort_by_path(splits.validation);
  sort_by_path(splits.test);
  return splits;
}

Manifest rebalance(const Manifest& manifest, std::uint64_t seed, const LabelSet* labels) {
  if (manifest.empty()) fail(ErrorCode::EmptyClass, "cannot rebalance an empty manifest");
  Manifest sorted = manifest;
  sort_by_path(sorted);

  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < sorted.size(); ++i) by_class[sorted[i].label].push_back(i);
  if (labels) {
    for (const auto& name : labels->names)
      if (!by_class.contains(name)) fail(ErrorCode::EmptyClass, "class '" + name + "' has no entries");
  }
  std::size_t target = 0;
  for (const auto& [label, idx] : by_class) target = std::max(target, idx.size());

  Rng rng(seed);
  Manifest out = sorted;
  for (const auto& [label, idx] : by_class) {
    std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
    for (std::size_t k = idx.size(); k < target; ++k) out.push_back(sorted[idx[pick(rng)]]);
  }
  return out;
}

std::vector<AudioClip> segment_noise_corpus(const fs::path& noise_root, double segment_s, SegmentReport* report,
                                            int required_rate_hz) {
  if (!(segment_s > 0)) fail(ErrorCode::BadArgument, "segment length must be positive");
  if (!fs::is_directory(noise_root)) fail(ErrorCode::Io, "noise directory " + noise_root.string() + " not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(noise_root))
    if (entry.is_regular_file() && is_wav(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  SegmentReport local;
  SegmentReport& rep = report ? *report : local;
  std::vector<AudioClip> segments;
  for (const auto& file : files) {
    AudioClip clip;
    try {
      clip = read_wav(file);
      if (required_rate_hz != 0 && clip.sample_rate_hz != required_rate_hz)
        fail(ErrorCode::UnsupportedEncoding, file.string() + ": sample rate " +
                                                 std::to_string(clip.sample_rate_hz) + " Hz");
    } catch (const Error& e) {
      ++rep.files_failed;
      rep.failures.emplace_back(e.what());
      continue;
    }
    ++rep.files_ok;
    const auto seg_len = static_cast<Eigen::Index>(std::llround(segment_s * clip.sample_rate_hz));
    const Eigen::Index count = seg_len > 0 ? clip.samples.size() / seg_len : 0;
    for (Eigen::Index k = 0; k < count; ++k) {
      AudioClip seg;
      seg.samples = clip.samples.segment(k * seg_len, seg_len);
      seg.sample_rate_hz = clip.sample_rate_hz;
      seg.source_id = file.string() + "#" + std::to_string(k);
      segments.push_back(std::move(seg));
    }
    rep.segments += count;
  }
  return segments;
}

std::vector<AudioClip> export_clips(std::span<const AudioClip> clips, const fs::path& dir, std::string_view stem) {
  fs::create_directories(dir);
  std::vector<AudioClip> out;
  out.reserve(clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    std::ostringstream name;
    name << stem << "_" << std::setw(6) << std::setfill('0') << i << ".wav";
    AudioClip clip = clips[i];
    clip.source_id = (dir / name.str()).string();
    write_wav(clip, clip.source_id);
    out.push_back(std::move(clip));
  }
  return out;
}

Manifest build_expanded_manifest(const Manifest& base, std::span<const AudioClip> noise_clips,
                                 std::span<const AudioClip> speech_clips, std::size_t n_noise, std::size_t n_speech,
                                 std::uint64_t seed) {
  if (n_noise > noise_clips.size())
    fail(ErrorCode::PoolTooSmall, "requested " + std::to_string(n_noise) + " noise samples from a pool of " +
                                      std::to_string(noise_clips.size()));
  if (n_speech > speech_clips.size())
    fail(ErrorCode::PoolTooSmall, "requested " + std::to_string(n_speech) + " speech samples from a pool of " +
                                      std::to_string(speech_clips.size()));
  Rng rng(seed);
  Manifest out = base;
  auto draw = [&](std::span<const AudioClip> pool, std::size_t n, std::string_view label) {
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(n);
    std::sort(order.begin(), order.end());
    for (std::size_t i : order)
      out.push_back({pool[i].source_id, std::string(label), pool[i].duration_seconds()});
  };
  draw(noise_clips, n_noise, kBackgroundNoise);
  draw(speech_clips, n_speech, kBackgroundVoice);
  return out;
}

Manifest filter_labels(const Manifest& manifest, const LabelSet& labels) {
  Manifest out;
  std::copy_if(manifest.begin(), manifest.end(), std::back_inserter(out),
               [&](const ManifestEntry& e) { return labels.contains(e.label); });
  return out;
}

std::map<std::string, std::int64_t> label_histogram(const Manifest& manifest) {
  std::map<std::string, std::int64_t> hist;
  for (const auto& e : manifest) ++hist[e.label];
  return hist;
}

std::string manifest_to_jsonl(const Manifest& manifest) {
  std::string out;
  for (const auto& e : manifest) {
    out += json{{"path", e.path}, {"label", e.label}, {"duration_s", e.duration_s}}.dump();
    out += '\n';
  }
  return out;
}

Manifest manifest_from_jsonl(std::string_view text) {
  Manifest out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("path").get<std::string>(), j.at("label").get<std::string>(),
                     j.at("duration_s").get<double>()});
    } catch (const json::exception& e) {
      fail(ErrorCode::InvalidConfig, "manifest line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_manifest(const Manifest& manifest, const fs::path& path) {
  const std::string text = manifest_to_jsonl(manifest);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Manifest read_manifest(const fs::path& path) {
  const auto bytes = read_file(path);
  return manifest_from_jsonl(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void write_label_set(const LabelSet& labels, const fs::path& path) {
  const std::string text = json{{"version", to_string(labels.version)}, {"names", labels.names}}.dump(2) + "\n";
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

LabelSet read_label_set(const fs::path& path) {
  const auto bytes = read_file(path);
  try {
    const json j = json::parse(bytes.begin(), bytes.end());
    LabelSet set;
    set.version = parse_dataset_version(j.at("version").get<std::string>());
    set.names = j.at("names").get<std::vector<std::string>>();
    return set;
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

}  // namespace matchbox
