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

#include "matchbox/engine.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "json.hpp"
#include "matchbox/error.h"
#include "matchbox/random.h"

using nlohmann::json;

namespace matchbox {

namespace {

// Seed stream tags.
enum Stream : std::uint64_t { kInit = 11, kShuffle, kAugment, kDropout, kSweepNoise };

}  // namespace

int default_worker_count() {
  if (const char* env = std::getenv("MATCHBOX_NUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < std::min(threads, n); ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

ClipSet ClipSet::from_manifest(const Manifest& manifest, const LabelSet& labels, std::size_t cache_limit,
                               double clip_seconds) {
  ClipSet set;
  set.clip_seconds_ = clip_seconds;
  for (const auto& e : manifest) {
    set.paths_.push_back(e.path);
    set.labels_.push_back(labels.index_of(e.label));
  }
  if (manifest.size() <= cache_limit) {
    for (const auto& path : set.paths_) set.clips_.push_back(fit_to_duration(read_wav(path), clip_seconds));
  }
  return set;
}

ClipSet ClipSet::from_clips(std::vector<AudioClip> clips, std::vector<int> labels, double clip_seconds) {
  if (clips.size() != labels.size()) fail(ErrorCode::BadArgument, "clip and label counts differ");
  ClipSet set;
  set.clip_seconds_ = clip_seconds;
  for (auto& c : clips) c = fit_to_duration(c, clip_seconds);
  set.clips_ = std::move(clips);
  set.labels_ = std::move(labels);
  return set;
}

AudioClip ClipSet::clip(std::size_t i) const {
  if (!clips_.empty()) return clips_[i];
  return fit_to_duration(read_wav(paths_[i]), clip_seconds_);
}

void TrainConfig::validate() const {
  if (epochs < 0) fail(ErrorCode::InvalidConfig, "epochs must be non-negative");
  if (batch_size < 1) fail(ErrorCode::InvalidConfig, "batch_size must be >= 1");
  if (trials < 1) fail(ErrorCode::InvalidConfig, "trials must be >= 1");
  model.validate();
  augment.validate();
  features.validate(kCanonicalSampleRate);
}

std::string metrics_to_json_line(const EpochMetrics& m) {
  json j = {{"epoch", m.epoch}, {"step", m.step}, {"lr", m.lr}, {"train_loss", m.train_loss}};
  j["val_acc"] = m.val_acc ? json(*m.val_acc) : json(nullptr);
  return j.dump();
}

nn::Tensor<float> batch_features(std::span<const FeatureMap> maps) {
  if (maps.empty()) fail(ErrorCode::ShapeMismatch, "empty batch");
  const Eigen::Index rows = maps[0].coeffs(), cols = maps[0].frames();
  const auto n = static_cast<Eigen::Index>(maps.size());
  Eigen::ArrayXf data(n * rows * cols);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& fm = maps[static_cast<std::size_t>(i)];
    if (fm.coeffs() != rows || fm.frames() != cols) fail(ErrorCode::ShapeMismatch, "feature maps differ in shape");
    Eigen::Map<nn::RowMatrix<float>>(data.data() + i * rows * cols, rows, cols) = fm.values.cast<float>();
  }
  return nn::Tensor<float>::from({n, rows, cols}, std::move(data));
}

namespace {

std::vector<int> argmax_rows(const nn::Tensor<float>& logits) {
  const Eigen::Index n = logits.dim(0), k = logits.dim(1);
  Eigen::Map<const nn::RowMatrix<float>> L(logits.data().data(), n, k);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    L.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

/// Eval-mode predictions for `count` inputs produced by make_features(i).
std::vector<int> predict_batched(Network<float>& net, std::size_t count, int batch_size, int workers,
                                 const std::function<FeatureMap(std::size_t)>& make_features) {
  nn::NoGradGuard no_grad;
  std::vector<int> out;
  out.reserve(count);
  const auto bs = static_cast<std::size_t>(std::max(1, batch_size));
  std::vector<FeatureMap> maps;
  for (std::size_t start = 0; start < count; start += bs) {
    const std::size_t n = std::min(bs, count - start);
    maps.assign(n, FeatureMap{});
    parallel_for(n, workers, [&](std::size_t j) { maps[j] = make_features(start + j); });
    const auto preds = argmax_rows(net.forward(batch_features(maps), nn::Mode::Eval));
    out.insert(out.end(), preds.begin(), preds.end());
  }
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const ClipSet& train_set, const ClipSet* validation,
                  const LabelSet& labels, std::span<const AudioClip> noise_pool, const EpochCallback& on_epoch) {
  cfg.validate();
  if (cfg.model.n_classes != labels.size())
    fail(ErrorCode::InvalidConfig, "model has " + std::to_string(cfg.model.n_classes) + " classes, label set has " +
                                       std::to_string(labels.size()));
  if (train_set.empty() && cfg.epochs > 0) fail(ErrorCode::EmptyEvalSet, "training set is empty");
  const int workers = cfg.deterministic ? 1 : (cfg.num_workers > 0 ? cfg.num_workers : default_worker_count());

  Network<float> net(cfg.model, derive_seed(cfg.seed, {kInit}));
  const std::size_t n = train_set.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((n + bs - 1) / bs);
  OptimConfig optim_cfg = cfg.optim;
  optim_cfg.total_steps = cfg.epochs * steps_per_epoch;
  optim_cfg.validate();
  NovoGrad<float> optimizer(optim_cfg);
  const MfccExtractor extractor(cfg.features);

  TrainResult result;
  result.best_checkpoint = make_checkpoint(net, labels, cfg.features, 0);
  double best_val = -1.0;

  std::vector<std::size_t> order(n);
  std::vector<FeatureMap> maps;
  std::vector<int> batch_labels;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, {kShuffle, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t count = std::min(bs, n - start);
      maps.assign(count, FeatureMap{});
      batch_labels.resize(count);
      parallel_for(count, workers, [&](std::size_t j) {
        const std::size_t idx = order[start + j];
        const std::uint64_t sample_seed =
            derive_seed(cfg.seed, {kAugment, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx)});
        const AudioClip wave = augment_waveform(train_set.clip(idx), cfg.augment, sample_seed, noise_pool);
        maps[j] = augment_features(extractor(wave), cfg.augment, sample_seed);
        batch_labels[j] = train_set.label(idx);
      });

      net.zero_grad();
      Rng dropout_rng(derive_seed(cfg.seed, {kDropout, static_cast<std::uint64_t>(step)}));
      auto logits = net.forward(batch_features(maps), nn::Mode::Train, &dropout_rng);
      auto loss = nn::softmax_cross_entropy(logits, batch_labels);
      nn::backward(loss);
      lr = lr_at(step, optimizer.config());
      auto params = net.parameters();
      optimizer.step(params, lr);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(count);
      ++step;
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.step = step;
    m.lr = lr;
    m.train_loss = n ? loss_sum / static_cast<double>(n) : 0.0;
    if (validation && !validation->empty()) {
      m.val_acc = evaluate(net, cfg.features, *validation, cfg.batch_size, workers);
      if (*m.val_acc > best_val) {
        best_val = *m.val_acc;
        result.best_epoch = epoch;
        result.best_checkpoint = make_checkpoint(net, labels, cfg.features, step);
      }
    }
    result.log.push_back(m);
    if (on_epoch) on_epoch(m);
  }

  result.final_checkpoint = make_checkpoint(net, labels, cfg.features, step, &optimizer);
  if (best_val < 0.0) {
    result.best_checkpoint = make_checkpoint(net, labels, cfg.features, step);
    result.best_epoch = cfg.epochs - 1;
  }
  return result;
}

std::vector<int> predict(Network<float>& net, const FeatureConfig& features, const ClipSet& clips, int batch_size,
                         int num_workers) {
  const MfccExtractor extractor(features);
  return predict_batched(net, clips.size(), batch_size, num_workers,
                         [&](std::size_t i) { return extractor(clips.clip(i)); });
}

double evaluate(Network<float>& net, const FeatureConfig& features, const ClipSet& clips, int batch_size,
                int num_workers) {
  if (clips.empty()) fail(ErrorCode::EmptyEvalSet, "evaluation set is empty");
  const auto preds = predict(net, features, clips, batch_size, num_workers);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == clips.label(i);
  return 100.0 * static_cast<double>(correct) / static_cast<double>(clips.size());
}

namespace {

void check_labels(const Checkpoint& ckpt, const Manifest& manifest) {
  for (const auto& e : manifest)
    if (!ckpt.labels.contains(e.label))
      fail(ErrorCode::LabelSetMismatch, "label '" + e.label + "' of " + e.path + " is not known to the checkpoint");
}

}  // namespace

double evaluate(const Checkpoint& ckpt, const Manifest& manifest, int batch_size, int num_workers) {
  if (manifest.empty()) fail(ErrorCode::EmptyEvalSet, "evaluation manifest is empty");
  check_labels(ckpt, manifest);
  Network<float> net = restore_network(ckpt);
  const ClipSet clips = ClipSet::from_manifest(manifest, ckpt.labels, 0);
  return evaluate(net, ckpt.features, clips, batch_size, num_workers);
}

ConfidenceInterval trials_ci(std::span<const double> accuracies) {
  const std::size_t n = accuracies.size();
  if (n < 2) fail(ErrorCode::TooFewTrials, "a confidence interval needs at least 2 trials");
  const double mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double a : accuracies) ss += (a - mean) * (a - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double t = boost::math::quantile(dist, 0.975);
  return {mean, t * sd / std::sqrt(static_cast<double>(n))};
}

SnrSweepReport snr_sweep(Network<float>& net, const FeatureConfig& features, const ClipSet& test,
                         std::span<const AudioClip> noise_pool, std::span<const double> points_db, std::uint64_t seed,
                         int draws, int batch_size, int num_workers) {
  if (noise_pool.empty()) fail(ErrorCode::EmptyNoisePool, "noise pool is empty");
  if (test.empty()) fail(ErrorCode::EmptyEvalSet, "test set is empty");
  if (draws < 1) fail(ErrorCode::BadArgument, "need at least one noise draw per sample");
  const MfccExtractor extractor(features);
  SnrSweepReport report;
  report.model = net.config().name();
  report.noise_draws_per_sample = draws;
  report.snr_points_db.assign(points_db.begin(), points_db.end());

  const std::size_t n = test.size();
  for (double snr : points_db) {
    const bool clean = std::isinf(snr) && snr > 0;
    // The clean point needs one pass; every draw would give the same answer.
    const std::size_t per_sample = clean ? 1 : static_cast<std::size_t>(draws);
    const auto preds = predict_batched(net, n * per_sample, batch_size, num_workers, [&](std::size_t job) {
      const std::size_t i = job / per_sample;
      const std::uint64_t d = job % per_sample;
      if (clean) return extractor(test.clip(i));
      // Noise choice depends on (sample, draw) only, so every SNR point sees
      // the same segments.
      Rng rng(derive_seed(seed, {kSweepNoise, static_cast<std::uint64_t>(i), d}));
      const auto pick = std::uniform_int_distribution<std::size_t>(0, noise_pool.size() - 1)(rng);
      return extractor(mix_at_snr(test.clip(i), noise_pool[pick], snr, OffsetPolicy::Random, rng()));
    });
    std::size_t correct = 0;
    for (std::size_t job = 0; job < preds.size(); ++job) correct += preds[job] == test.label(job / per_sample);
    report.accuracy.push_back(100.0 * static_cast<double>(correct) / static_cast<double>(preds.size()));
  }
  return report;
}

SnrSweepReport snr_sweep(const Checkpoint& ckpt, const Manifest& test_manifest, std::span<const AudioClip> noise_pool,
                         std::span<const double> points_db, std::uint64_t seed, int draws, int num_workers) {
  if (test_manifest.empty()) fail(ErrorCode::EmptyEvalSet, "test manifest is empty");
  check_labels(ckpt, test_manifest);
  Network<float> net = restore_network(ckpt);
  const ClipSet test = ClipSet::from_manifest(test_manifest, ckpt.labels, 0);
  return snr_sweep(net, ckpt.features, test, noise_pool, points_db, seed, draws, 128, num_workers);
}

std::string sweep_to_json(const SnrSweepReport& report) {
  json points = json::array();
  for (double p : report.snr_points_db) points.push_back(std::isinf(p) ? json("inf") : json(p));
  return json{{"model", report.model},
              {"snr_points_db", points},
              {"accuracy", report.accuracy},
              {"noise_draws_per_sample", report.noise_draws_per_sample}}
      .dump(2);
}

std::string sweep_table(std::span<const SnrSweepReport> reports) {
  std::ostringstream out;
  if (reports.empty()) return {};
  out << std::left << std::setw(10) << "Model" << "SNR (in dB)\n" << std::setw(10) << "";
  for (double p : reports[0].snr_points_db) {
    std::ostringstream label;
    if (std::isinf(p))
      label << "clean";
    else
      label << p;
    out << std::right << std::setw(8) << label.str();
  }
  out << "\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(10) << r.model;
    for (double a : r.accuracy) out << std::right << std::setw(8) << std::fixed << std::setprecision(2) << a;
    out << "\n";
    out.unsetf(std::ios::fixed);
  }
  return out.str();
}

}  // namespace matchbox
