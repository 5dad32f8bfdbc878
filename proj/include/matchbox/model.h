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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "matchbox/nn/layers.h"
#include "matchbox/nn/tensor.h"
#include "matchbox/random.h"

namespace matchbox {

/// Kernel widths for B residual blocks: 13, 15, 17, ...
std::vector<int> kernel_schedule(int blocks);

struct ModelConfig {
  int blocks = 3;
  int repeats = 1;
  int channels = 64;
  int n_classes = 35;
  int n_feat = 64;
  int prologue_channels = 128;
  int prologue_kernel = 11;
  std::vector<int> block_kernels;  // empty means kernel_schedule(blocks)
  int epilogue_channels = 128;
  int epilogue_kernel = 29;
  int epilogue_dilation = 2;
  double dropout = 0.1;

  /// Parses "BxRxC", e.g. "3x2x64".
  static ModelConfig from_name(std::string_view name, int n_classes);
  std::string name() const;
  std::vector<int> kernels() const;
  void validate() const;

  /// Compares the resolved kernel schedule, not the raw override list.
  bool operator==(const ModelConfig& other) const;
};

/// Closed-form count of trainable scalars (conv weights, biases, BN affine).
std::int64_t count_params(const ModelConfig& cfg);

enum class ParamKind { ConvWeight, Bias, BnAffine };

template <typename Scalar>
struct Parameter {
  std::string name;
  nn::Tensor<Scalar> tensor;
  ParamKind kind;
};

template <typename Scalar>
struct Buffer {
  std::string name;
  typename nn::Tensor<Scalar>::Array* values;
};

/// One row of the layer listing, comparable with the architecture table.
struct LayerInfo {
  std::string name;
  int sub_blocks = 1;
  int out_channels = 0;
  int kernel = 1;
  int dilation = 1;
};

/// Depthwise (optional) -> pointwise -> batch norm (optional) or bias.
template <typename Scalar>
struct ConvUnit {
  std::optional<nn::Tensor<Scalar>> depthwise;  // C_in x k
  int dilation = 1;
  nn::Tensor<Scalar> pointwise;                 // C_out x C_in
  std::optional<nn::Tensor<Scalar>> bias;       // C_out, only without BN
  std::optional<nn::BatchNorm<Scalar>> bn;

  nn::Tensor<Scalar> forward(const nn::Tensor<Scalar>& x, nn::Mode mode);
};

template <typename Scalar>
struct ResidualBlock {
  std::vector<ConvUnit<Scalar>> subs;
  ConvUnit<Scalar> residual;
};

/// MatchboxNet-BxRxC: prologue separable conv, B residual blocks of R
/// separable sub-blocks, separable dilated Conv2, pointwise Conv3/Conv4,
/// then mean pooling over time to logits.
template <typename Scalar>
class Network {
 public:
  Network(ModelConfig cfg, std::uint64_t seed);

  /// features: N x n_feat x T. Returns N x n_classes logits. dropout_rng is
  /// required in train mode when dropout > 0.
  nn::Tensor<Scalar> forward(const nn::Tensor<Scalar>& features, nn::Mode mode,
                             Rng* dropout_rng = nullptr);

  std::vector<Parameter<Scalar>> parameters();
  std::vector<Buffer<Scalar>> buffers();
  std::int64_t param_count();

  std::vector<LayerInfo> layer_listing() const;
  const ModelConfig& config() const { return cfg_; }

  void zero_grad();
  /// Deep copy (parameters are otherwise shared between copies).
  Network clone() const;

 private:
  nn::Tensor<Scalar> activate(const nn::Tensor<Scalar>& x, nn::Mode mode, Rng* rng) const;

  ModelConfig cfg_;
  ConvUnit<Scalar> prologue_;
  std::vector<ResidualBlock<Scalar>> blocks_;
  ConvUnit<Scalar> conv2_;
  ConvUnit<Scalar> conv3_;
  ConvUnit<Scalar> conv4_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace matchbox
