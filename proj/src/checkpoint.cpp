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

#include "matchbox/checkpoint.h"

#include <algorithm>
#include <bit>
#include <cstring>

#include "matchbox/config.h"
#include "matchbox/error.h"

using nlohmann::json;

namespace matchbox {

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) fail(ErrorCode::CorruptTensor, std::string("checkpoint truncated while reading ") + what);
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <typename Array>
NamedArray to_named(std::string name, const std::vector<std::uint32_t>& dims, const Array& values) {
  NamedArray a{std::move(name), dims, std::vector<float>(static_cast<std::size_t>(values.size()))};
  for (Eigen::Index i = 0; i < values.size(); ++i) a.values[static_cast<std::size_t>(i)] = static_cast<float>(values[i]);
  return a;
}

std::vector<std::uint32_t> dims_of(const nn::Shape& shape) {
  std::vector<std::uint32_t> dims;
  for (auto d : shape) dims.push_back(static_cast<std::uint32_t>(d));
  return dims;
}

const NamedArray& require(const Checkpoint& ckpt, const std::string& name, Eigen::Index size,
                          const nn::Shape* shape = nullptr) {
  const NamedArray* a = ckpt.find(name);
  if (!a) fail(ErrorCode::CorruptTensor, "checkpoint lacks tensor " + name);
  if (shape && !std::equal(a->dims.begin(), a->dims.end(), shape->begin(), shape->end(),
                           [](std::uint32_t d, Eigen::Index e) { return static_cast<Eigen::Index>(d) == e; }))
    fail(ErrorCode::CorruptTensor, "tensor " + name + " has the wrong shape, expected " + nn::shape_string(*shape));
  if (static_cast<Eigen::Index>(a->values.size()) != size)
    fail(ErrorCode::CorruptTensor, "tensor " + name + " has " + std::to_string(a->values.size()) +
                                       " values, expected " + std::to_string(size));
  return *a;
}

}  // namespace

const NamedArray* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

Checkpoint make_checkpoint(Network<float>& net, const LabelSet& labels, const FeatureConfig& features,
                           std::int64_t step, const NovoGrad<float>* optimizer) {
  Checkpoint ckpt;
  ckpt.model = net.config();
  ckpt.labels = labels;
  ckpt.features = features;
  ckpt.step = step;
  auto params = net.parameters();
  for (const auto& p : params) ckpt.tensors.push_back(to_named(p.name, dims_of(p.tensor.shape()), p.tensor.data()));
  for (const auto& b : net.buffers())
    ckpt.tensors.push_back(to_named(b.name, {static_cast<std::uint32_t>(b.values->size())}, *b.values));
  if (optimizer && !optimizer->state().empty()) {
    const auto& state = optimizer->state();
    for (std::size_t i = 0; i < params.size() && i < state.size(); ++i) {
      const auto& s = state[i];
      if (s.m.size() == 0) continue;
      ckpt.tensors.push_back(to_named("optim." + params[i].name + ".m", dims_of(params[i].tensor.shape()), s.m));
      Eigen::Array2d vs(s.v, static_cast<double>(s.steps));
      ckpt.tensors.push_back(to_named("optim." + params[i].name + ".v", {2}, vs));
    }
  }
  return ckpt;
}

Network<float> restore_network(const Checkpoint& ckpt) {
  Network<float> net(ckpt.model, 0);
  for (auto& p : net.parameters()) {
    const NamedArray& a = require(ckpt, p.name, p.tensor.size(), &p.tensor.shape());
    p.tensor.data() = Eigen::Map<const Eigen::ArrayXf>(a.values.data(), p.tensor.size());
  }
  for (auto& b : net.buffers()) {
    const NamedArray& a = require(ckpt, b.name, b.values->size());
    *b.values = Eigen::Map<const Eigen::ArrayXf>(a.values.data(), b.values->size());
  }
  return net;
}

void restore_optimizer(const Checkpoint& ckpt, Network<float>& net, NovoGrad<float>& optimizer) {
  auto params = net.parameters();
  auto& state = optimizer.state();
  state.assign(params.size(), {});
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::string base = "optim." + params[i].name;
    if (!ckpt.find(base + ".m")) continue;
    const NamedArray& m = require(ckpt, base + ".m", params[i].tensor.size());
    const NamedArray& v = require(ckpt, base + ".v", 2);
    state[i].m = Eigen::Map<const Eigen::ArrayXf>(m.values.data(), params[i].tensor.size());
    state[i].v = v.values[0];
    state[i].steps = static_cast<std::int64_t>(v.values[1]);
  }
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  const json config = {{"model", to_json(ckpt.model)},
                       {"labels", {{"version", to_string(ckpt.labels.version)}, {"names", ckpt.labels.names}}},
                       {"features", to_json(ckpt.features)},
                       {"step", ckpt.step}};
  const std::string config_text = config.dump();
  Writer w;
  w.raw(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(config_text.size()));
  w.raw(config_text);
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.raw(t.name);
    w.u32(static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) w.u32(d);
    for (float v : t.values) w.f32(v);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0)
    fail(ErrorCode::BadMagic, "not a checkpoint (magic mismatch)");
  Reader r(bytes.subspan(4));
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    fail(ErrorCode::VersionMismatch, "checkpoint format version " + std::to_string(version) +
                                         ", this build reads " + std::to_string(kCheckpointVersion));
  const std::uint32_t config_len = r.u32("config length");
  const std::string config_text = r.str(config_len, "config");

  Checkpoint ckpt;
  try {
    const json config = json::parse(config_text);
    update_from_json(config.at("model"), ckpt.model);
    update_from_json(config.at("features"), ckpt.features);
    ckpt.labels.version = parse_dataset_version(config.at("labels").at("version").get<std::string>());
    ckpt.labels.names = config.at("labels").at("names").get<std::vector<std::string>>();
    ckpt.step = config.at("step").get<std::int64_t>();
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptTensor, std::string("checkpoint config unreadable: ") + e.what());
  }

  const std::uint32_t count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedArray t;
    t.name = r.str(r.u32("name length"), "tensor name");
    const std::uint32_t rank = r.u32("rank");
    std::uint64_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.dims.push_back(r.u32("dims"));
      n *= t.dims.back();
    }
    if (n * 4 > r.remaining())
      fail(ErrorCode::CorruptTensor, "tensor " + t.name + " declares " + std::to_string(n) +
                                         " values but the payload is shorter");
    t.values.resize(static_cast<std::size_t>(n));
    for (auto& v : t.values) v = r.f32("payload");
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) fail(ErrorCode::CorruptTensor, "trailing bytes after the last tensor");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return deserialize_checkpoint(bytes);
}

}  // namespace matchbox
