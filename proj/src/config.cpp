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

#include "matchbox/config.h"

#include <algorithm>
#include <fstream>

#include "matchbox/error.h"

using nlohmann::json;

namespace matchbox {

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* section) {
  if (!j.is_object()) fail(ErrorCode::InvalidConfig, std::string(section) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) fail(ErrorCode::InvalidConfig, "unknown key '" + key + "' in " + section);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const char* section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string(section) + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_range(const json& j, const char* key, Range<T>& out, const char* section) {
  if (!j.contains(key)) return;
  std::vector<T> v;
  read(j, key, v, section);
  if (v.size() != 2) fail(ErrorCode::InvalidConfig, std::string(section) + "." + key + " must be [lo, hi]");
  out = {v[0], v[1]};
}

template <typename T>
json range(const Range<T>& r) {
  return json::array({r.lo, r.hi});
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"blocks", c.blocks},
          {"repeats", c.repeats},
          {"channels", c.channels},
          {"n_classes", c.n_classes},
          {"n_feat", c.n_feat},
          {"prologue_channels", c.prologue_channels},
          {"prologue_kernel", c.prologue_kernel},
          {"block_kernels", c.kernels()},
          {"epilogue_channels", c.epilogue_channels},
          {"epilogue_kernel", c.epilogue_kernel},
          {"epilogue_dilation", c.epilogue_dilation},
          {"dropout", c.dropout}};
}

void update_from_json(const json& j, ModelConfig& c) {
  const char* s = "model";
  check_keys(j, {"name", "blocks", "repeats", "channels", "n_classes", "n_feat", "prologue_channels",
                 "prologue_kernel", "block_kernels", "epilogue_channels", "epilogue_kernel",
                 "epilogue_dilation", "dropout"}, s);
  if (j.contains("name")) {
    std::string name;
    read(j, "name", name, s);
    const ModelConfig parsed = ModelConfig::from_name(name, c.n_classes);
    c.blocks = parsed.blocks;
    c.repeats = parsed.repeats;
    c.channels = parsed.channels;
    c.block_kernels.clear();
  }
  read(j, "blocks", c.blocks, s);
  read(j, "repeats", c.repeats, s);
  read(j, "channels", c.channels, s);
  read(j, "n_classes", c.n_classes, s);
  read(j, "n_feat", c.n_feat, s);
  read(j, "prologue_channels", c.prologue_channels, s);
  read(j, "prologue_kernel", c.prologue_kernel, s);
  read(j, "block_kernels", c.block_kernels, s);
  read(j, "epilogue_channels", c.epilogue_channels, s);
  read(j, "epilogue_kernel", c.epilogue_kernel, s);
  read(j, "epilogue_dilation", c.epilogue_dilation, s);
  read(j, "dropout", c.dropout, s);
}

json to_json(const FeatureConfig& c) {
  return {{"window_s", c.window_s},     {"hop_s", c.hop_s},
          {"n_fft", c.n_fft},           {"n_mels", c.n_mels},
          {"n_coeffs", c.n_coeffs},     {"f_min_hz", c.f_min_hz},
          {"f_max_hz", c.f_max_hz},     {"target_frames", c.target_frames},
          {"log_floor", c.log_floor},   {"preemphasis", c.preemphasis},
          {"normalize_per_feature", c.normalize_per_feature}};
}

void update_from_json(const json& j, FeatureConfig& c) {
  const char* s = "features";
  check_keys(j, {"window_s", "hop_s", "n_fft", "n_mels", "n_coeffs", "f_min_hz", "f_max_hz", "target_frames",
                 "log_floor", "preemphasis", "normalize_per_feature"}, s);
  read(j, "window_s", c.window_s, s);
  read(j, "hop_s", c.hop_s, s);
  read(j, "n_fft", c.n_fft, s);
  read(j, "n_mels", c.n_mels, s);
  read(j, "n_coeffs", c.n_coeffs, s);
  read(j, "f_min_hz", c.f_min_hz, s);
  read(j, "f_max_hz", c.f_max_hz, s);
  read(j, "target_frames", c.target_frames, s);
  read(j, "log_floor", c.log_floor, s);
  read(j, "preemphasis", c.preemphasis, s);
  read(j, "normalize_per_feature", c.normalize_per_feature, s);
}

json to_json(const AugmentConfig& c) {
  return {{"time_shift", c.time_shift},
          {"time_shift_ms", range(c.time_shift_ms)},
          {"white_noise", c.white_noise},
          {"white_noise_db", range(c.white_noise_db)},
          {"spec_augment", c.spec_augment},
          {"spec_time_masks", c.spec_time_masks},
          {"spec_time_width", range(c.spec_time_width)},
          {"spec_freq_masks", c.spec_freq_masks},
          {"spec_freq_width", range(c.spec_freq_width)},
          {"spec_cutout", c.spec_cutout},
          {"cutout_rects", c.cutout_rects},
          {"cutout_time", range(c.cutout_time)},
          {"cutout_freq", range(c.cutout_freq)},
          {"background_noise", c.background_noise},
          {"bg_snr_db", range(c.bg_snr_db)}};
}

void update_from_json(const json& j, AugmentConfig& c) {
  const char* s = "augment";
  check_keys(j, {"time_shift", "time_shift_ms", "white_noise", "white_noise_db", "spec_augment",
                 "spec_time_masks", "spec_time_width", "spec_freq_masks", "spec_freq_width", "spec_cutout",
                 "cutout_rects", "cutout_time", "cutout_freq", "background_noise", "bg_snr_db"}, s);
  read(j, "time_shift", c.time_shift, s);
  read_range(j, "time_shift_ms", c.time_shift_ms, s);
  read(j, "white_noise", c.white_noise, s);
  read_range(j, "white_noise_db", c.white_noise_db, s);
  read(j, "spec_augment", c.spec_augment, s);
  read(j, "spec_time_masks", c.spec_time_masks, s);
  read_range(j, "spec_time_width", c.spec_time_width, s);
  read(j, "spec_freq_masks", c.spec_freq_masks, s);
  read_range(j, "spec_freq_width", c.spec_freq_width, s);
  read(j, "spec_cutout", c.spec_cutout, s);
  read(j, "cutout_rects", c.cutout_rects, s);
  read_range(j, "cutout_time", c.cutout_time, s);
  read_range(j, "cutout_freq", c.cutout_freq, s);
  read(j, "background_noise", c.background_noise, s);
  read_range(j, "bg_snr_db", c.bg_snr_db, s);
}

json to_json(const OptimConfig& c) {
  return {{"beta1", c.beta1},          {"beta2", c.beta2},
          {"weight_decay", c.weight_decay}, {"lr_max", c.lr_max},
          {"lr_min", c.lr_min},        {"warmup_ratio", c.warmup_ratio},
          {"hold_ratio", c.hold_ratio}, {"poly_power", c.poly_power},
          {"eps", c.eps}};
}

void update_from_json(const json& j, OptimConfig& c) {
  const char* s = "optim";
  check_keys(j, {"beta1", "beta2", "weight_decay", "lr_max", "lr_min", "warmup_ratio", "hold_ratio",
                 "poly_power", "eps"}, s);
  read(j, "beta1", c.beta1, s);
  read(j, "beta2", c.beta2, s);
  read(j, "weight_decay", c.weight_decay, s);
  read(j, "lr_max", c.lr_max, s);
  read(j, "lr_min", c.lr_min, s);
  read(j, "warmup_ratio", c.warmup_ratio, s);
  read(j, "hold_ratio", c.hold_ratio, s);
  read(j, "poly_power", c.poly_power, s);
  read(j, "eps", c.eps, s);
}

json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"deterministic", c.deterministic},
          {"out_dir", c.out_dir},
          {"data",
           {{"root", c.data.root},
            {"version", c.data.version},
            {"expanded", c.data.expanded},
            {"classes", c.data.classes},
            {"noise_dir", c.data.noise_dir},
            {"voice_dir", c.data.voice_dir},
            {"n_noise", c.data.n_noise},
            {"n_voice", c.data.n_voice},
            {"segment_s", c.data.segment_s},
            {"rebalance", c.data.rebalance},
            {"data_dir", c.data.data_dir}}},
          {"model", to_json(c.model)},
          {"features", to_json(c.features)},
          {"augment", to_json(c.augment)},
          {"optim", to_json(c.optim)},
          {"train",
           {{"epochs", c.train.epochs},
            {"batch_size", c.train.batch_size},
            {"trials", c.train.trials},
            {"num_workers", c.train.num_workers},
            {"cache_limit", c.train.cache_limit}}},
          {"sweep", {{"snr_points_db", c.sweep.snr_points_db}, {"draws", c.sweep.draws}}}};
}

void update_from_json(const json& j, RunConfig& c) {
  check_keys(j, {"seed", "deterministic", "out_dir", "data", "model", "features", "augment", "optim", "train",
                 "sweep"}, "config");
  read(j, "seed", c.seed, "config");
  read(j, "deterministic", c.deterministic, "config");
  read(j, "out_dir", c.out_dir, "config");
  if (j.contains("data")) {
    const json& d = j.at("data");
    const char* s = "data";
    check_keys(d, {"root", "version", "expanded", "classes", "noise_dir", "voice_dir", "n_noise", "n_voice",
                   "segment_s", "rebalance", "data_dir"}, s);
    read(d, "root", c.data.root, s);
    read(d, "version", c.data.version, s);
    read(d, "expanded", c.data.expanded, s);
    read(d, "classes", c.data.classes, s);
    read(d, "noise_dir", c.data.noise_dir, s);
    read(d, "voice_dir", c.data.voice_dir, s);
    read(d, "n_noise", c.data.n_noise, s);
    read(d, "n_voice", c.data.n_voice, s);
    read(d, "segment_s", c.data.segment_s, s);
    read(d, "rebalance", c.data.rebalance, s);
    read(d, "data_dir", c.data.data_dir, s);
  }
  if (j.contains("model")) update_from_json(j.at("model"), c.model);
  if (j.contains("features")) update_from_json(j.at("features"), c.features);
  if (j.contains("augment")) update_from_json(j.at("augment"), c.augment);
  if (j.contains("optim")) update_from_json(j.at("optim"), c.optim);
  if (j.contains("train")) {
    const json& t = j.at("train");
    const char* s = "train";
    check_keys(t, {"epochs", "batch_size", "trials", "num_workers", "cache_limit"}, s);
    read(t, "epochs", c.train.epochs, s);
    read(t, "batch_size", c.train.batch_size, s);
    read(t, "trials", c.train.trials, s);
    read(t, "num_workers", c.train.num_workers, s);
    read(t, "cache_limit", c.train.cache_limit, s);
  }
  if (j.contains("sweep")) {
    const json& w = j.at("sweep");
    check_keys(w, {"snr_points_db", "draws"}, "sweep");
    read(w, "snr_points_db", c.sweep.snr_points_db, "sweep");
    read(w, "draws", c.sweep.draws, "sweep");
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  RunConfig cfg;
  update_from_json(j, cfg);
  return cfg;
}

}  // namespace matchbox
