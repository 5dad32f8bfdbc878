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
#include <span>
#include <string>
#include <vector>

#include "matchbox/dataset.h"
#include "matchbox/features.h"
#include "matchbox/model.h"
#include "matchbox/optim.h"

namespace matchbox {

inline constexpr char kCheckpointMagic[4] = {'M', 'B', 'X', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

/// Model configuration, label set, front-end settings and every tensor needed
/// to rebuild the network: parameters, batch-norm running statistics and,
/// optionally, optimizer state under the "optim." prefix.
struct Checkpoint {
  ModelConfig model;
  LabelSet labels;
  FeatureConfig features;
  std::int64_t step = 0;
  std::vector<NamedArray> tensors;

  const NamedArray* find(std::string_view name) const;
};

Checkpoint make_checkpoint(Network<float>& net, const LabelSet& labels, const FeatureConfig& features,
                           std::int64_t step, const NovoGrad<float>* optimizer = nullptr);

/// Rebuilds the network; throws CorruptTensor when a tensor is missing or
/// has the wrong shape.
Network<float> restore_network(const Checkpoint& ckpt);

/// Loads "optim." tensors back into an optimizer for the same network.
void restore_optimizer(const Checkpoint& ckpt, Network<float>& net, NovoGrad<float>& optimizer);

/// Layout, all integers little-endian u32:
///   "MBXN" | version | config length | config JSON (UTF-8) | tensor count |
///   per tensor: name length | name | rank | dims... | f32 payload
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace matchbox
