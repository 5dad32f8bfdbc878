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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "matchbox/augment.h"
#include "matchbox/checkpoint.h"
#include "matchbox/dataset.h"
#include "matchbox/features.h"
#include "matchbox/model.h"
#include "matchbox/optim.h"

namespace matchbox {

/// Labeled 1-second clips, either held in memory or decoded from a manifest
/// on demand. Safe for concurrent reads.
class ClipSet {
 public:
  ClipSet() = default;

  /// Entries are decoded on access unless the manifest has at most
  /// `cache_limit` entries, in which case all clips are preloaded.
  static ClipSet from_manifest(const Manifest& manifest, const LabelSet& labels, std::size_t cache_limit = 4096,
                               double clip_seconds = 1.0);
  static ClipSet from_clips(std::vector<AudioClip> clips, std::vector<int> labels, double clip_seconds = 1.0);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  AudioClip clip(std::size_t i) const;
  int label(std::size_t i) const { return labels_[i]; }
  std::span<const int> labels() const { return labels_; }

 private:
  std::vector<std::string> paths_;
  std::vector<AudioClip> clips_;
  std::vector<int> labels_;
  double clip_seconds_ = 1.0;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 128;
  std::uint64_t seed = 0;
  int trials = 5;
  ModelConfig model;
  OptimConfig optim;
  AugmentConfig augment;
  FeatureConfig features;
  bool deterministic = false;
  int num_workers = 0;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  std::int64_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::optional<double> val_acc;
};

std::string metrics_to_json_line(const EpochMetrics& m);

struct TrainResult {
  Checkpoint final_checkpoint;
  /// Highest validation accuracy, earliest epoch on ties; the final
  /// checkpoint when there is no validation set.
  Checkpoint best_checkpoint;
  int best_epoch = -1;
  std::vector<EpochMetrics> log;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Runs epochs x ceil(N / batch) steps of: waveform augments, MFCC, feature
/// augments, forward, cross-entropy, backward, NovoGrad at lr_at(step).
/// Augmentation for sample i in epoch e depends only on (seed, i, e).
TrainResult train(const TrainConfig& cfg, const ClipSet& train_set, const ClipSet* validation,
                  const LabelSet& labels, std::span<const AudioClip> noise_pool = {},
                  const EpochCallback& on_epoch = {});

/// Stacks feature maps into an N x coeffs x frames tensor.
nn::Tensor<float> batch_features(std::span<const FeatureMap> maps);

/// Eval-mode argmax predictions on clean features.
std::vector<int> predict(Network<float>& net, const FeatureConfig& features, const ClipSet& clips,
                         int batch_size = 128, int num_workers = 1);

/// Percentage of argmax-correct predictions; throws EmptyEvalSet.
double evaluate(Network<float>& net, const FeatureConfig& features, const ClipSet& clips, int batch_size = 128,
                int num_workers = 1);
/// Checks that every manifest label belongs to the checkpoint's label set.
double evaluate(const Checkpoint& ckpt, const Manifest& manifest, int batch_size = 128, int num_workers = 1);

struct ConfidenceInterval {
  double mean = 0.0;
  double halfwidth = 0.0;
};

/// mean +- t(0.975, n-1) * s / sqrt(n) with the sample standard deviation.
ConfidenceInterval trials_ci(std::span<const double> accuracies);

struct SnrSweepReport {
  std::string model;
  std::vector<double> snr_points_db;
  std::vector<double> accuracy;
  int noise_draws_per_sample = 10;
};

/// Mixes every test clip with `draws` seed-chosen noise segments at each SNR
/// and reports the mean accuracy over all (sample, draw) pairs. +inf is the
/// clean pass-through.
SnrSweepReport snr_sweep(Network<float>& net, const FeatureConfig& features, const ClipSet& test,
                         std::span<const AudioClip> noise_pool, std::span<const double> points_db,
                         std::uint64_t seed, int draws = 10, int batch_size = 128, int num_workers = 1);
SnrSweepReport snr_sweep(const Checkpoint& ckpt, const Manifest& test_manifest,
                         std::span<const AudioClip> noise_pool, std::span<const double> points_db,
                         std::uint64_t seed, int draws = 10, int num_workers = 1);

std::string sweep_to_json(const SnrSweepReport& report);
/// Plain-text table, one row per report, one column per SNR point.
std::string sweep_table(std::span<const SnrSweepReport> reports);

/// MATCHBOX_NUM_WORKERS when set, otherwise hardware concurrency.
int default_worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace matchbox
