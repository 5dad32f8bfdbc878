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
#include <string>
#include <vector>

#include "json.hpp"
#include "matchbox/augment.h"
#include "matchbox/features.h"
#include "matchbox/model.h"
#include "matchbox/optim.h"

namespace matchbox {

struct DataConfig {
  std::string root;         // Speech Commands root, for prepare-data
  std::string version = "v2";
  bool expanded = false;
  std::vector<std::string> classes;  // optional subset of the label set
  std::string noise_dir;
  std::string voice_dir;
  int n_noise = 3500;
  int n_voice = 3500;
  double segment_s = 1.0;
  bool rebalance = true;
  std::string data_dir;     // output of prepare-data, input of train
};

struct TrainSettings {
  int epochs = 200;
  int batch_size = 128;
  int trials = 5;
  int num_workers = 0;  // 0: MATCHBOX_NUM_WORKERS or hardware concurrency
  int cache_limit = 4096;
};

struct SweepConfig {
  std::vector<double> snr_points_db = {-10, 0, 10, 20, 30, 40, 50};
  int draws = 10;
};

/// Everything a run depends on. Serialized as resolved-config.json.
struct RunConfig {
  std::uint64_t seed = 0;
  bool deterministic = false;
  std::string out_dir = ".";
  DataConfig data;
  ModelConfig model;
  FeatureConfig features;
  AugmentConfig augment;
  OptimConfig optim;
  TrainSettings train;
  SweepConfig sweep;
};

// Conversions. Parsing rejects unknown keys with InvalidConfig and leaves
// fields that are absent at their current values.
nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const FeatureConfig& cfg);
nlohmann::json to_json(const AugmentConfig& cfg);
nlohmann::json to_json(const OptimConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);

void update_from_json(const nlohmann::json& j, ModelConfig& cfg);
void update_from_json(const nlohmann::json& j, FeatureConfig& cfg);
void update_from_json(const nlohmann::json& j, AugmentConfig& cfg);
void update_from_json(const nlohmann::json& j, OptimConfig& cfg);
void update_from_json(const nlohmann::json& j, RunConfig& cfg);

RunConfig load_run_config(const std::string& path);

}  // namespace matchbox
