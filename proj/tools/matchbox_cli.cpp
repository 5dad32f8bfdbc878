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

// matchbox: data preparation, training, evaluation and noise-robustness
// sweeps for MatchboxNet keyword spotting.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "matchbox/checkpoint.h"
#include "matchbox/config.h"
#include "matchbox/dataset.h"
#include "matchbox/engine.h"
#include "matchbox/error.h"
#include "matchbox/random.h"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace matchbox;

namespace {

// Flags shared by every subcommand. Optional values override the config
// file, which overrides the defaults.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> model;
  std::optional<std::string> version;
  bool expanded = false;
  std::optional<std::string> noise_dir;
  bool deterministic = false;
  std::optional<std::string> out_dir;
  std::optional<std::string> data_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--seed", f.seed, "Top-level random seed");
  cmd->add_option("--model", f.model, "Model size as BxRxC, e.g. 3x2x64");
  cmd->add_option("--dataset-version", f.version, "v1 or v2")->check(CLI::IsMember({"v1", "v2"}));
  cmd->add_flag("--expanded", f.expanded, "Add background_noise and background_voice classes");
  cmd->add_option("--noise-dir", f.noise_dir, "Directory of background noise recordings");
  cmd->add_flag("--deterministic", f.deterministic, "Single-threaded, bit-reproducible run");
  cmd->add_option("--out-dir", f.out_dir, "Output directory");
  cmd->add_option("--data-dir", f.data_dir, "Directory written by prepare-data");
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig cfg = f.config.empty() ? RunConfig{} : load_run_config(f.config);
  if (f.seed) cfg.seed = *f.seed;
  if (f.model) {
    const auto parsed = ModelConfig::from_name(*f.model, cfg.model.n_classes);
    cfg.model.blocks = parsed.blocks;
    cfg.model.repeats = parsed.repeats;
    cfg.model.channels = parsed.channels;
    cfg.model.block_kernels.clear();
  }
  if (f.version) cfg.data.version = *f.version;
  if (f.expanded) cfg.data.expanded = true;
  if (f.noise_dir) cfg.data.noise_dir = *f.noise_dir;
  if (f.deterministic) cfg.deterministic = true;
  if (f.out_dir) cfg.out_dir = *f.out_dir;
  if (f.data_dir) cfg.data.data_dir = *f.data_dir;
  return cfg;
}

DatasetVersion version_of(const RunConfig& cfg) {
  const auto base = parse_dataset_version(cfg.data.version);
  if (!cfg.data.expanded) return base;
  return base == DatasetVersion::V1 ? DatasetVersion::V1Expanded : DatasetVersion::V2Expanded;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!(out << text)) fail(ErrorCode::Io, "cannot write " + path.string());
}

void write_resolved(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / "resolved-config.json", to_json(cfg).dump(2) + "\n");
}

int workers_for(const RunConfig& cfg) {
  if (cfg.deterministic) return 1;
  return cfg.train.num_workers > 0 ? cfg.train.num_workers : default_worker_count();
}

std::vector<AudioClip> load_segments(const std::string& dir, double segment_s, const fs::path& report_path) {
  SegmentReport report;
  auto clips = segment_noise_corpus(dir, segment_s, &report, 16000);
  const json j = {{"directory", dir},         {"files_ok", report.files_ok},
                  {"files_failed", report.files_failed}, {"segments", report.segments},
                  {"failures", report.failures}};
  write_text(report_path, j.dump(2) + "\n");
  std::cerr << dir << ": " << report.segments << " segments from " << report.files_ok << " files ("
            << report.files_failed << " skipped)\n";
  return clips;
}

// Draws `n` segments per class from what is left of each pool, writes them
// as WAV files and appends them to `split`.
void add_background(Manifest& split, std::vector<AudioClip>& noise, std::vector<AudioClip>& voice, std::size_t n,
                    std::uint64_t seed, const fs::path& dir, const std::string& stem) {
  const Manifest drawn = build_expanded_manifest({}, noise, voice, n, n, seed);
  auto take = [&](std::vector<AudioClip>& pool, std::string_view label) {
    std::set<std::string> chosen;
    for (const auto& e : drawn)
      if (e.label == label) chosen.insert(e.path);
    std::vector<AudioClip> picked, rest;
    for (auto& c : pool) (chosen.contains(c.source_id) ? picked : rest).push_back(std::move(c));
    pool = std::move(rest);
    for (const auto& c : export_clips(picked, dir / std::string(label), stem))
      split.push_back({c.source_id, std::string(label), c.duration_seconds()});
  };
  take(noise, kBackgroundNoise);
  take(voice, kBackgroundVoice);
}

int prepare_data(const RunConfig& cfg) {
  if (cfg.data.root.empty()) fail(ErrorCode::InvalidConfig, "prepare-data needs --data-root");
  const fs::path out(cfg.out_dir);
  const auto base_labels = LabelSet::for_version(parse_dataset_version(cfg.data.version));
  LabelSet labels = cfg.data.classes.empty() ? base_labels : base_labels.subset(cfg.data.classes);
  auto splits = scan_speech_commands(cfg.data.root, base_labels);
  splits.train = filter_labels(splits.train, labels);
  splits.validation = filter_labels(splits.validation, labels);
  splits.test = filter_labels(splits.test, labels);

  if (cfg.data.expanded) {
    if (cfg.data.noise_dir.empty() || cfg.data.voice_dir.empty())
      fail(ErrorCode::InvalidConfig, "the expanded corpus needs --noise-dir and --voice-dir");
    labels = labels.expanded();
    auto noise = load_segments(cfg.data.noise_dir, cfg.data.segment_s, out / "noise_report.json");
    auto voice = load_segments(cfg.data.voice_dir, cfg.data.segment_s, out / "voice_report.json");
    // Validation and test receive background clips in proportion to their
    // size relative to train, drawn from what train did not use.
    const double train_n = std::max<double>(1.0, static_cast<double>(splits.train.size()));
    auto share = [&](const Manifest& m, int n) {
      return static_cast<std::size_t>(std::llround(n * static_cast<double>(m.size()) / train_n));
    };
    const std::size_t n_train = std::min(cfg.data.n_noise, cfg.data.n_voice);
    const fs::path bg = out / "background";
    add_background(splits.train, noise, voice, n_train, derive_seed(cfg.seed, {1}), bg, "train");
    add_background(splits.validation, noise, voice, share(splits.validation, static_cast<int>(n_train)),
                   derive_seed(cfg.seed, {2}), bg, "validation");
    add_background(splits.test, noise, voice, share(splits.test, static_cast<int>(n_train)),
                   derive_seed(cfg.seed, {3}), bg, "test");
  }
  if (cfg.data.rebalance) splits.train = rebalance(splits.train, derive_seed(cfg.seed, {4}), &labels);

  write_manifest(splits.train, out / "train.jsonl");
  write_manifest(splits.validation, out / "validation.jsonl");
  write_manifest(splits.test, out / "test.jsonl");
  write_label_set(labels, out / "labels.json");
  std::cout << "classes " << labels.size() << "  train " << splits.train.size() << "  validation "
            << splits.validation.size() << "  test " << splits.test.size() << "\n";
  return 0;
}

fs::path data_dir_of(const RunConfig& cfg) {
  if (cfg.data.data_dir.empty()) fail(ErrorCode::InvalidConfig, "no --data-dir given");
  return cfg.data.data_dir;
}

int train_cmd(RunConfig cfg) {
  const fs::path data = data_dir_of(cfg);
  const LabelSet labels = read_label_set(data / "labels.json");
  cfg.model.n_classes = labels.size();
  write_resolved(cfg);

  const Manifest train_m = read_manifest(data / "train.jsonl");
  const Manifest val_m = fs::exists(data / "validation.jsonl") ? read_manifest(data / "validation.jsonl") : Manifest{};
  const auto cache = static_cast<std::size_t>(cfg.train.cache_limit);
  const ClipSet train_set = ClipSet::from_manifest(train_m, labels, cache);
  const ClipSet val_set = ClipSet::from_manifest(val_m, labels, cache);
  std::vector<AudioClip> noise;
  AugmentConfig augment = cfg.augment;
  if (!cfg.data.noise_dir.empty()) {
    noise = load_segments(cfg.data.noise_dir, cfg.data.segment_s, fs::path(cfg.out_dir) / "noise_report.json");
    augment.background_noise = true;
  }

  const Manifest test_m = fs::exists(data / "test.jsonl") ? read_manifest(data / "test.jsonl") : Manifest{};
  const int workers = workers_for(cfg);
  std::vector<double> test_acc;
  json summary = {{"model", cfg.model.name()}, {"trials", json::array()}};
  for (int trial = 0; trial < cfg.train.trials; ++trial) {
    TrainConfig tc;
    tc.epochs = cfg.train.epochs;
    tc.batch_size = cfg.train.batch_size;
    tc.seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(trial)});
    tc.model = cfg.model;
    tc.optim = cfg.optim;
    tc.augment = augment;
    tc.features = cfg.features;
    tc.deterministic = cfg.deterministic;
    tc.num_workers = cfg.train.num_workers;

    const fs::path dir = fs::path(cfg.out_dir) / ("trial_" + std::to_string(trial));
    fs::create_directories(dir);
    std::ofstream log(dir / "metrics.jsonl");
    const auto result = train(tc, train_set, val_set.empty() ? nullptr : &val_set, labels, noise,
                              [&](const EpochMetrics& m) {
                                log << metrics_to_json_line(m) << "\n" << std::flush;
                                std::cerr << "trial " << trial << " " << metrics_to_json_line(m) << "\n";
                              });
    save_checkpoint(result.final_checkpoint, dir / "final.ckpt");
    save_checkpoint(result.best_checkpoint, dir / "best.ckpt");
    json t = {{"trial", trial}, {"seed", tc.seed}, {"best_epoch", result.best_epoch}};
    if (!test_m.empty()) {
      const double acc = evaluate(result.best_checkpoint, test_m, cfg.train.batch_size, workers);
      test_acc.push_back(acc);
      t["test_accuracy"] = acc;
      std::cout << "trial " << trial << " test accuracy " << acc << "\n";
    }
    summary["trials"].push_back(t);
  }
  if (test_acc.size() >= 2) {
    const auto ci = trials_ci(test_acc);
    summary["test_accuracy_mean"] = ci.mean;
    summary["test_accuracy_ci95"] = ci.halfwidth;
    std::printf("%s test accuracy %.2f +- %.3f over %zu trials\n", cfg.model.name().c_str(), ci.mean, ci.halfwidth,
                test_acc.size());
  }
  write_text(fs::path(cfg.out_dir) / "summary.json", summary.dump(2) + "\n");
  return 0;
}

Manifest eval_manifest(const RunConfig& cfg, const std::string& manifest) {
  if (!manifest.empty()) return read_manifest(manifest);
  return read_manifest(data_dir_of(cfg) / "test.jsonl");
}

int eval_cmd(const RunConfig& cfg, const std::vector<std::string>& ckpts, const std::string& manifest_path) {
  write_resolved(cfg);
  const Manifest manifest = eval_manifest(cfg, manifest_path);
  std::vector<double> acc;
  for (const auto& path : ckpts) {
    acc.push_back(evaluate(load_checkpoint(path), manifest, cfg.train.batch_size, workers_for(cfg)));
    std::printf("%s %.4f\n", path.c_str(), acc.back());
  }
  if (acc.size() >= 2) {
    const auto ci = trials_ci(acc);
    std::printf("mean %.4f +- %.4f (95%% CI, n=%zu)\n", ci.mean, ci.halfwidth, acc.size());
  }
  return 0;
}

int sweep_cmd(const RunConfig& cfg, const std::vector<std::string>& ckpts, const std::string& manifest_path) {
  if (cfg.data.noise_dir.empty()) fail(ErrorCode::InvalidConfig, "sweep-snr needs --noise-dir");
  write_resolved(cfg);
  const Manifest manifest = eval_manifest(cfg, manifest_path);
  const auto noise =
      load_segments(cfg.data.noise_dir, cfg.data.segment_s, fs::path(cfg.out_dir) / "noise_report.json");
  std::vector<SnrSweepReport> reports;
  json all = json::array();
  for (const auto& path : ckpts) {
    reports.push_back(snr_sweep(load_checkpoint(path), manifest, noise, cfg.sweep.snr_points_db, cfg.seed,
                                cfg.sweep.draws, workers_for(cfg)));
    all.push_back(json::parse(sweep_to_json(reports.back())));
  }
  const std::string table = sweep_table(reports);
  write_text(fs::path(cfg.out_dir) / "sweep.json", all.dump(2) + "\n");
  write_text(fs::path(cfg.out_dir) / "sweep.txt", table);
  std::cout << table;
  return 0;
}

int count_cmd(RunConfig cfg, std::optional<int> classes, bool listing) {
  cfg.model.n_classes = classes ? *classes : LabelSet::for_version(version_of(cfg)).size();
  cfg.model.validate();
  write_resolved(cfg);
  if (listing) {
    Network<float> net(cfg.model, 0);
    std::printf("%-6s %3s %5s %6s %8s\n", "block", "R", "C", "kernel", "dilation");
    for (const auto& row : net.layer_listing())
      std::printf("%-6s %3d %5d %6d %8d\n", row.name.c_str(), row.sub_blocks, row.out_channels, row.kernel,
                  row.dilation);
  }
  std::cout << count_params(cfg.model) << "\n";
  return 0;
}

int inspect_cmd(const RunConfig& cfg, const std::string& path) {
  write_resolved(cfg);
  const auto ckpt = load_checkpoint(path);
  const json header = {{"model", to_json(ckpt.model)},
                       {"labels", ckpt.labels.names},
                       {"dataset_version", to_string(ckpt.labels.version)},
                       {"features", to_json(ckpt.features)},
                       {"step", ckpt.step},
                       {"param_count", count_params(ckpt.model)}};
  std::cout << header.dump(2) << "\n";
  for (const auto& t : ckpt.tensors) {
    std::cout << t.name << " [";
    for (std::size_t i = 0; i < t.dims.size(); ++i) std::cout << (i ? "x" : "") << t.dims[i];
    std::cout << "]\n";
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"MatchboxNet keyword spotting"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* prep = app.add_subcommand("prepare-data", "Scan a Speech Commands tree into split manifests");
  add_common(prep, flags);
  std::string data_root, voice_dir;
  std::vector<std::string> subset;
  std::optional<int> n_noise, n_voice;
  prep->add_option("--data-root", data_root, "Speech Commands root directory");
  prep->add_option("--voice-dir", voice_dir, "Directory of background speech recordings");
  prep->add_option("--subset", subset, "Keep only these command words");
  prep->add_option("--n-noise", n_noise, "background_noise clips added to train");
  prep->add_option("--n-voice", n_voice, "background_voice clips added to train");
  bool no_rebalance = false;
  prep->add_flag("--no-rebalance", no_rebalance, "Keep the natural class counts");

  auto* tr = app.add_subcommand("train", "Train one model per trial");
  add_common(tr, flags);
  std::optional<int> epochs, batch, trials;
  tr->add_option("--epochs", epochs);
  tr->add_option("--batch-size", batch);
  tr->add_option("--trials", trials);

  std::vector<std::string> ckpts;
  std::string manifest;
  auto* ev = app.add_subcommand("eval", "Accuracy of one or more checkpoints on a manifest");
  add_common(ev, flags);
  ev->add_option("--ckpt", ckpts, "Checkpoint file(s)")->required();
  ev->add_option("--manifest", manifest, "Manifest (defaults to <data-dir>/test.jsonl)");

  auto* sw = app.add_subcommand("sweep-snr", "Accuracy under background noise over a range of SNRs");
  add_common(sw, flags);
  std::vector<double> snr_points;
  std::optional<int> draws;
  sw->add_option("--ckpt", ckpts, "Checkpoint file(s), one table row each")->required();
  sw->add_option("--manifest", manifest, "Manifest (defaults to <data-dir>/test.jsonl)");
  sw->add_option("--snr", snr_points, "SNR points in dB; inf is the clean pass");
  sw->add_option("--draws", draws, "Noise draws per test sample");

  auto* cp = app.add_subcommand("count-params", "Print the number of trainable parameters");
  add_common(cp, flags);
  std::optional<int> classes;
  bool listing = false;
  cp->add_option("--classes", classes, "Number of output classes");
  cp->add_flag("--listing", listing, "Also print the layer table");

  auto* ic = app.add_subcommand("inspect-ckpt", "Print a checkpoint's configuration and tensor shapes");
  add_common(ic, flags);
  std::string ckpt_path;
  ic->add_option("ckpt", ckpt_path, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  RunConfig cfg = resolve(flags);
  if (prep->parsed()) {
    if (!data_root.empty()) cfg.data.root = data_root;
    if (!voice_dir.empty()) cfg.data.voice_dir = voice_dir;
    if (!subset.empty()) cfg.data.classes = subset;
    if (n_noise) cfg.data.n_noise = *n_noise;
    if (n_voice) cfg.data.n_voice = *n_voice;
    if (no_rebalance) cfg.data.rebalance = false;
    write_resolved(cfg);
    return prepare_data(cfg);
  }
  if (tr->parsed()) {
    if (epochs) cfg.train.epochs = *epochs;
    if (batch) cfg.train.batch_size = *batch;
    if (trials) cfg.train.trials = *trials;
    return train_cmd(cfg);
  }
  if (ev->parsed()) return eval_cmd(cfg, ckpts, manifest);
  if (sw->parsed()) {
    if (!snr_points.empty()) cfg.sweep.snr_points_db = snr_points;
    if (draws) cfg.sweep.draws = *draws;
    return sweep_cmd(cfg, ckpts, manifest);
  }
  if (cp->parsed()) return count_cmd(cfg, classes, listing);
  return inspect_cmd(cfg, ckpt_path);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << error_name(e.code()) << ": " << e.what() << "\n";
    return is_internal(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 2;
  }
}
