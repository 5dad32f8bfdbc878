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

#include "matchbox/model.h"

#include <charconv>
#include <cmath>

#include "matchbox/error.h"

namespace matchbox {

std::vector<int> kernel_schedule(int blocks) {
  std::vector<int> kernels;
  for (int b = 0; b < blocks; ++b) kernels.push_back(13 + 2 * b);
  return kernels;
}

ModelConfig ModelConfig::from_name(std::string_view name, int n_classes) {
  int dims[3] = {0, 0, 0};
  std::string_view rest = name;
  for (int i = 0; i < 3; ++i) {
    const auto sep = i < 2 ? rest.find('x') : std::string_view::npos;
    const std::string_view field = rest.substr(0, sep);
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), dims[i]);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty() ||
        (i < 2 && sep == std::string_view::npos))
      fail(ErrorCode::InvalidConfig, "model name must look like BxRxC, got '" + std::string(name) + "'");
    if (i < 2) rest = rest.substr(sep + 1);
  }
  ModelConfig cfg;
  cfg.blocks = dims[0];
  cfg.repeats = dims[1];
  cfg.channels = dims[2];
  cfg.n_classes = n_classes;
  cfg.validate();
  return cfg;
}

std::string ModelConfig::name() const {
  return std::to_string(blocks) + "x" + std::to_string(repeats) + "x" + std::to_string(channels);
}

bool ModelConfig::operator==(const ModelConfig& o) const {
  return blocks == o.blocks && repeats == o.repeats && channels == o.channels && n_classes == o.n_classes &&
         n_feat == o.n_feat && prologue_channels == o.prologue_channels && prologue_kernel == o.prologue_kernel &&
         kernels() == o.kernels() && epilogue_channels == o.epilogue_channels &&
         epilogue_kernel == o.epilogue_kernel && epilogue_dilation == o.epilogue_dilation && dropout == o.dropout;
}

std::vector<int> ModelConfig::kernels() const {
  return block_kernels.empty() ? kernel_schedule(blocks) : block_kernels;
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorCode::InvalidConfig, what);
  };
  require(blocks >= 1 && repeats >= 1 && channels >= 1, "B, R and C must be >= 1");
  require(n_classes >= 2, "need at least 2 classes");
  require(n_feat >= 1 && prologue_channels >= 1 && epilogue_channels >= 1, "channel counts must be >= 1");
  require(prologue_kernel >= 1 && epilogue_kernel >= 1 && epilogue_dilation >= 1, "bad prologue/epilogue kernel");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  const auto k = kernels();
  require(static_cast<int>(k.size()) == blocks, "block_kernels must have one entry per block");
  for (std::size_t i = 0; i < k.size(); ++i) {
    require(k[i] >= 1 && k[i] % 2 == 1, "block kernels must be odd");
    require(i == 0 || k[i] > k[i - 1], "block kernels must be strictly increasing");
  }
}

namespace {

std::int64_t unit_params(std::int64_t cin, std::int64_t cout, std::int64_t k, bool separable, bool bn) {
  return (separable ? cin * k : 0) + cout * cin + (bn ? 2 * cout : cout);
}

}  // namespace

std::int64_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  const auto k = cfg.kernels();
  std::int64_t total = unit_params(cfg.n_feat, cfg.prologue_channels, cfg.prologue_kernel, true, true);
  std::int64_t cin = cfg.prologue_channels;
  for (int b = 0; b < cfg.blocks; ++b) {
    for (int r = 0; r < cfg.repeats; ++r)
      total += unit_params(r == 0 ? cin : cfg.channels, cfg.channels, k[b], true, true);
    total += unit_params(cin, cfg.channels, 1, false, true);
    cin = cfg.channels;
  }
  total += unit_params(cin, cfg.epilogue_channels, cfg.epilogue_kernel, true, true);
  total += unit_params(cfg.epilogue_channels, cfg.epilogue_channels, 1, false, true);
  total += unit_params(cfg.epilogue_channels, cfg.n_classes, 1, false, false);
  return total;
}

template <typename Scalar>
nn::Tensor<Scalar> ConvUnit<Scalar>::forward(const nn::Tensor<Scalar>& x, nn::Mode mode) {
  nn::Tensor<Scalar> y = depthwise ? nn::depthwise_conv1d<Scalar>(x, *depthwise, std::nullopt, dilation) : x;
  y = nn::pointwise_conv1d(y, pointwise, bias);
  if (bn) y = nn::batch_norm1d(y, *bn, mode);
  return y;
}

namespace {

template <typename Scalar>
nn::Tensor<Scalar> uniform_init(nn::Shape shape, nn::Index fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  const nn::Index n = nn::shape_size(shape);
  typename nn::Tensor<Scalar>::Array values(n);
  for (nn::Index i = 0; i < n; ++i) values[i] = static_cast<Scalar>(dist(rng));
  return nn::Tensor<Scalar>::from(std::move(shape), std::move(values), true);
}

template <typename Scalar>
ConvUnit<Scalar> make_unit(int cin, int cout, int kernel, int dilation, bool separable, bool bn, Rng& rng) {
  ConvUnit<Scalar> unit;
  if (separable) unit.depthwise = uniform_init<Scalar>({cin, kernel}, kernel, rng);
  unit.dilation = dilation;
  unit.pointwise = uniform_init<Scalar>({cout, cin}, cin, rng);
  if (bn)
    unit.bn.emplace(cout);
  else
    unit.bias = nn::Tensor<Scalar>::zeros({cout}, true);
  return unit;
}

template <typename Scalar>
void collect(ConvUnit<Scalar>& unit, const std::string& prefix, std::vector<Parameter<Scalar>>& out) {
  if (unit.depthwise) out.push_back({prefix + ".depthwise.weight", *unit.depthwise, ParamKind::ConvWeight});
  out.push_back({prefix + ".pointwise.weight", unit.pointwise, ParamKind::ConvWeight});
  if (unit.bias) out.push_back({prefix + ".pointwise.bias", *unit.bias, ParamKind::Bias});
  if (unit.bn) {
    out.push_back({prefix + ".bn.gamma", unit.bn->gamma, ParamKind::BnAffine});
    out.push_back({prefix + ".bn.beta", unit.bn->beta, ParamKind::BnAffine});
  }
}

template <typename Scalar>
void collect_buffers(ConvUnit<Scalar>& unit, const std::string& prefix, std::vector<Buffer<Scalar>>& out) {
  if (!unit.bn) return;
  out.push_back({prefix + ".bn.running_mean", &unit.bn->running_mean});
  out.push_back({prefix + ".bn.running_var", &unit.bn->running_var});
}

template <typename Scalar>
void deep_copy(ConvUnit<Scalar>& unit) {
  if (unit.depthwise) unit.depthwise = unit.depthwise->clone();
  unit.pointwise = unit.pointwise.clone();
  if (unit.bias) unit.bias = unit.bias->clone();
  if (unit.bn) {
    unit.bn->gamma = unit.bn->gamma.clone();
    unit.bn->beta = unit.bn->beta.clone();
  }
}

std::string block_prefix(std::size_t b) { return "blocks." + std::to_string(b); }

}  // namespace

template <typename Scalar>
Network<Scalar>::Network(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(seed);
  const auto kernels = cfg_.kernels();
  prologue_ = make_unit<Scalar>(cfg_.n_feat, cfg_.prologue_channels, cfg_.prologue_kernel, 1, true, true, rng);
  int cin = cfg_.prologue_channels;
  for (int b = 0; b < cfg_.blocks; ++b) {
    ResidualBlock<Scalar> block;
    for (int r = 0; r < cfg_.repeats; ++r)
      block.subs.push_back(make_unit<Scalar>(r == 0 ? cin : cfg_.channels, cfg_.channels, kernels[b], 1, true, true, rng));
    block.residual = make_unit<Scalar>(cin, cfg_.channels, 1, 1, false, true, rng);
    blocks_.push_back(std::move(block));
    cin = cfg_.channels;
  }
  conv2_ = make_unit<Scalar>(cin, cfg_.epilogue_channels, cfg_.epilogue_kernel, cfg_.epilogue_dilation, true, true, rng);
  conv3_ = make_unit<Scalar>(cfg_.epilogue_channels, cfg_.epilogue_channels, 1, 1, false, true, rng);
  conv4_ = make_unit<Scalar>(cfg_.epilogue_channels, cfg_.n_classes, 1, 1, false, false, rng);
}

template <typename Scalar>
nn::Tensor<Scalar> Network<Scalar>::activate(const nn::Tensor<Scalar>& x, nn::Mode mode, Rng* rng) const {
  nn::Tensor<Scalar> y = nn::relu(x);
  if (mode == nn::Mode::Train && cfg_.dropout > 0.0) {
    if (!rng) fail(ErrorCode::BadArgument, "train-mode forward with dropout needs a generator");
    y = nn::dropout(y, cfg_.dropout, mode, *rng);
  }
  return y;
}

template <typename Scalar>
nn::Tensor<Scalar> Network<Scalar>::forward(const nn::Tensor<Scalar>& features, nn::Mode mode, Rng* rng) {
  if (features.rank() != 3 || features.dim(1) != cfg_.n_feat)
    fail(ErrorCode::ShapeMismatch, "expected N x " + std::to_string(cfg_.n_feat) + " x T features, got " +
                                       nn::shape_string(features.shape()));
  nn::Tensor<Scalar> x = activate(prologue_.forward(features, mode), mode, rng);
  for (auto& block : blocks_) {
    nn::Tensor<Scalar> y = x;
    for (std::size_t r = 0; r < block.subs.size(); ++r) {
      y = block.subs[r].forward(y, mode);
      if (r + 1 < block.subs.size()) y = activate(y, mode, rng);
    }
    x = activate(y + block.residual.forward(x, mode), mode, rng);
  }
  x = activate(conv2_.forward(x, mode), mode, rng);
  x = activate(conv3_.forward(x, mode), mode, rng);
  return nn::global_avg_pool(conv4_.forward(x, mode));
}

template <typename Scalar>
std::vector<Parameter<Scalar>> Network<Scalar>::parameters() {
  std::vector<Parameter<Scalar>> out;
  collect(prologue_, "prologue", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    for (std::size_t r = 0; r < blocks_[b].subs.size(); ++r)
      collect(blocks_[b].subs[r], block_prefix(b) + ".sub." + std::to_string(r), out);
    collect(blocks_[b].residual, block_prefix(b) + ".residual", out);
  }
  collect(conv2_, "conv2", out);
  collect(conv3_, "conv3", out);
  collect(conv4_, "conv4", out);
  return out;
}

template <typename Scalar>
std::vector<Buffer<Scalar>> Network<Scalar>::buffers() {
  std::vector<Buffer<Scalar>> out;
  collect_buffers(prologue_, "prologue", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    for (std::size_t r = 0; r < blocks_[b].subs.size(); ++r)
      collect_buffers(blocks_[b].subs[r], block_prefix(b) + ".sub." + std::to_string(r), out);
    collect_buffers(blocks_[b].residual, block_prefix(b) + ".residual", out);
  }
  collect_buffers(conv2_, "conv2", out);
  collect_buffers(conv3_, "conv3", out);
  return out;
}

template <typename Scalar>
std::int64_t Network<Scalar>::param_count() {
  std::int64_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.size();
  return n;
}

template <typename Scalar>
std::vector<LayerInfo> Network<Scalar>::layer_listing() const {
  std::vector<LayerInfo> rows;
  rows.push_back({"Conv1", 1, cfg_.prologue_channels, cfg_.prologue_kernel, 1});
  const auto kernels = cfg_.kernels();
  for (int b = 0; b < cfg_.blocks; ++b)
    rows.push_back({"B" + std::to_string(b + 1), cfg_.repeats, cfg_.channels, kernels[b], 1});
  rows.push_back({"Conv2", 1, cfg_.epilogue_channels, cfg_.epilogue_kernel, cfg_.epilogue_dilation});
  rows.push_back({"Conv3", 1, cfg_.epilogue_channels, 1, 1});
  rows.push_back({"Conv4", 1, cfg_.n_classes, 1, 1});
  return rows;
}

template <typename Scalar>
void Network<Scalar>::zero_grad() {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

template <typename Scalar>
Network<Scalar> Network<Scalar>::clone() const {
  Network copy = *this;
  deep_copy(copy.prologue_);
  for (auto& block : copy.blocks_) {
    for (auto& sub : block.subs) deep_copy(sub);
    deep_copy(block.residual);
  }
  deep_copy(copy.conv2_);
  deep_copy(copy.conv3_);
  deep_copy(copy.conv4_);
  return copy;
}

template struct ConvUnit<float>;
template struct ConvUnit<double>;
template class Network<float>;
template class Network<double>;

}  // namespace matchbox
