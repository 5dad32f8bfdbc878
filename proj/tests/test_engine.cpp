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

#include <cmath>
#include <limits>

#include "doctest.h"
#include "matchbox/engine.h"
#include "matchbox/error.h"
#include "test_util.h"

using namespace matchbox;
using matchbox::testing::gaussian_clip;
using matchbox::testing::TempDir;
using matchbox::testing::two_class_corpus;

namespace {

LabelSet two_labels() { return LabelSet{{"noise", "tone"}, DatasetVersion::V2}; }

ClipSet toy_set(int per_class, std::uint64_t seed) {
  std::vector<AudioClip> clips;
  std::vector<int> labels;
  two_class_corpus(per_class, seed, clips, labels);
  return ClipSet::from_clips(std::move(clips), std::move(labels));
}

TrainConfig tiny_config(int epochs) {
  TrainConfig cfg;
  cfg.model = ModelConfig::from_name("1x1x8", 2);
  cfg.model.prologue_channels = 16;
  cfg.model.epilogue_channels = 16;
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.seed = 5;
  cfg.deterministic = true;
  return cfg;
}

ErrorCode error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("confidence interval from the t distribution") {
  const std::vector<double> same(5, 97.0);
  const auto ci = trials_ci(same);
  CHECK(ci.mean == doctest::Approx(97.0));
  CHECK(ci.halfwidth == doctest::Approx(0.0));

  // Sample standard deviation exactly 0.1; t(0.975, 4) = 2.776445 from tables.
  const double a = std::sqrt(1.6) * 0.1, b = std::sqrt(0.4) * 0.1;
  const std::vector<double> spread{97 - a, 97 - b, 97, 97 + b, 97 + a};
  const auto ci2 = trials_ci(spread);
  CHECK(ci2.mean == doctest::Approx(97.0));
  CHECK(ci2.halfwidth == doctest::Approx(2.776445 * 0.1 / std::sqrt(5.0)).epsilon(1e-6));
  CHECK(ci2.halfwidth == doctest::Approx(0.124).epsilon(0.01));

  const std::vector<double> one{97.0};
  CHECK(error_of([&] { trials_ci(one); }) == ErrorCode::TooFewTrials);
}

TEST_CASE("batches stack feature maps") {
  FeatureMap a, b;
  a.values = Eigen::MatrixXd::Constant(64, 128, 1.0);
  b.values = Eigen::MatrixXd::Constant(64, 128, 2.0);
  a.values(3, 7) = 5.0;
  const std::vector<FeatureMap> maps{a, b};
  const auto t = batch_features(maps);
  CHECK(t.shape() == nn::Shape{2, 64, 128});
  CHECK(t.data()[3 * 128 + 7] == 5.0f);
  CHECK(t.data()[64 * 128] == 2.0f);
}

TEST_CASE("zero epochs return the initial network") {
  const auto set = toy_set(2, 1);
  const auto r1 = train(tiny_config(0), set, nullptr, two_labels());
  const auto r2 = train(tiny_config(0), set, nullptr, two_labels());
  CHECK(r1.final_checkpoint.step == 0);
  CHECK(r1.log.empty());
  const auto net = restore_network(r1.final_checkpoint);
  for (const auto& t : r1.final_checkpoint.tensors) {
    if (t.name.ends_with("running_mean")) {
      for (float v : t.values) CHECK(v == 0.0f);
    }
    if (t.name.ends_with("running_var")) {
      for (float v : t.values) CHECK(v == 1.0f);
    }
    if (t.name.ends_with("gamma")) {
      for (float v : t.values) CHECK(v == 1.0f);
    }
    const auto* other = r2.final_checkpoint.find(t.name);
    REQUIRE(other != nullptr);
    CHECK(other->values == t.values);
  }
}

TEST_CASE("training is reproducible with a fixed seed") {
  const auto set = toy_set(4, 2);
  const auto a = train(tiny_config(2), set, &set, two_labels());
  const auto b = train(tiny_config(2), set, &set, two_labels());
  REQUIRE(a.log.size() == 2);
  CHECK(a.log.back().train_loss == b.log.back().train_loss);
  CHECK(a.log.back().step == 4);
  for (const auto& t : a.final_checkpoint.tensors) CHECK(b.final_checkpoint.find(t.name)->values == t.values);

  auto other_seed = tiny_config(2);
  other_seed.seed = 6;
  const auto c = train(other_seed, set, &set, two_labels());
  CHECK(c.log.back().train_loss != a.log.back().train_loss);
}

TEST_CASE("multi-threaded data loading matches the single-threaded run") {
  const auto set = toy_set(4, 3);
  auto cfg = tiny_config(1);
  const auto serial = train(cfg, set, nullptr, two_labels());
  cfg.deterministic = false;
  cfg.num_workers = 3;
  const auto threaded = train(cfg, set, nullptr, two_labels());
  CHECK(serial.log.back().train_loss == threaded.log.back().train_loss);
}

TEST_CASE("metrics log lines carry every field") {
  const auto set = toy_set(2, 4);
  int calls = 0;
  const auto r = train(tiny_config(1), set, &set, two_labels(), {}, [&](const EpochMetrics&) { ++calls; });
  CHECK(calls == 1);
  const auto line = metrics_to_json_line(r.log[0]);
  for (const char* key : {"\"epoch\"", "\"step\"", "\"lr\"", "\"train_loss\"", "\"val_acc\""})
    CHECK(line.find(key) != std::string::npos);
  CHECK(line.find('\n') == std::string::npos);
  CHECK(r.best_epoch == 0);
}

TEST_CASE("evaluation is independent of batch size, order and duplication") {
  const auto set = toy_set(6, 5);
  auto net = restore_network(train(tiny_config(1), set, nullptr, two_labels()).final_checkpoint);
  const FeatureConfig fc;
  const double base = evaluate(net, fc, set, 128);
  CHECK(evaluate(net, fc, set, 5) == base);
  CHECK(evaluate(net, fc, set, 1, 2) == base);

  std::vector<AudioClip> rev_clips, dup_clips;
  std::vector<int> rev_labels, dup_labels;
  for (std::size_t i = set.size(); i-- > 0;) {
    rev_clips.push_back(set.clip(i));
    rev_labels.push_back(set.label(i));
  }
  for (std::size_t i = 0; i < set.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      dup_clips.push_back(set.clip(i));
      dup_labels.push_back(set.label(i));
    }
  CHECK(evaluate(net, fc, ClipSet::from_clips(rev_clips, rev_labels)) == base);
  CHECK(evaluate(net, fc, ClipSet::from_clips(dup_clips, dup_labels)) == doctest::Approx(base));
  CHECK(error_of([&] { evaluate(net, fc, ClipSet{}); }) == ErrorCode::EmptyEvalSet);
}

TEST_CASE("checkpoint evaluation checks the manifest labels") {
  TempDir tmp;
  const auto set = toy_set(2, 6);
  const auto ckpt = train(tiny_config(0), set, nullptr, two_labels()).final_checkpoint;
  write_wav(set.clip(0), tmp.path() / "x.wav");
  const Manifest ok{{(tmp.path() / "x.wav").string(), "tone", 1.0}};
  const Manifest bad{{(tmp.path() / "x.wav").string(), "yes", 1.0}};
  CHECK_NOTHROW(evaluate(ckpt, ok));
  CHECK(error_of([&] { evaluate(ckpt, bad); }) == ErrorCode::LabelSetMismatch);
  CHECK(error_of([&] { evaluate(ckpt, Manifest{}); }) == ErrorCode::EmptyEvalSet);
}

TEST_CASE("the clean sweep point equals evaluate") {
  const auto set = toy_set(4, 7);
  auto net = restore_network(train(tiny_config(1), set, nullptr, two_labels()).final_checkpoint);
  const FeatureConfig fc;
  std::vector<AudioClip> noise{gaussian_clip(50, 0.2), gaussian_clip(51, 0.2, 8000)};
  const std::vector<double> points{-10.0, 20.0, std::numeric_limits<double>::infinity()};
  const auto report = snr_sweep(net, fc, set, noise, points, 3, 2);
  REQUIRE(report.accuracy.size() == 3);
  CHECK(report.accuracy[2] == evaluate(net, fc, set));
  CHECK(report.noise_draws_per_sample == 2);
  const auto again = snr_sweep(net, fc, set, noise, points, 3, 2);
  CHECK(again.accuracy == report.accuracy);
  const auto json = sweep_to_json(report);
  CHECK(json.find("\"snr_points_db\"") != std::string::npos);
  const std::vector<SnrSweepReport> reports{report};
  CHECK(sweep_table(reports).find(report.model) != std::string::npos);
}

TEST_CASE("sweep errors") {
  const auto set = toy_set(1, 8);
  auto net = restore_network(train(tiny_config(0), set, nullptr, two_labels()).final_checkpoint);
  const FeatureConfig fc;
  const std::vector<double> points{0.0};
  std::vector<AudioClip> silent{AudioClip{Eigen::VectorXf::Zero(16000)}};
  CHECK(error_of([&] { snr_sweep(net, fc, set, silent, points, 1, 1); }) == ErrorCode::SilentNoise);
  CHECK(error_of([&] { snr_sweep(net, fc, set, {}, points, 1, 1); }) == ErrorCode::EmptyNoisePool);
}

TEST_CASE("label count must match the model") {
  const auto set = toy_set(1, 9);
  auto cfg = tiny_config(1);
  cfg.model.n_classes = 3;
  CHECK(error_of([&] { train(cfg, set, nullptr, two_labels()); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("parallel_for visits every index once") {
  std::vector<std::atomic<int>> hits(100);
  parallel_for(100, 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
}
