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

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "matchbox/error.h"
#include "matchbox/model.h"

namespace matchbox {

struct OptimConfig {
  double beta1 = 0.95;
  double beta2 = 0.5;
  double weight_decay = 0.001;
  double lr_max = 0.05;
  double lr_min = 0.001;
  double warmup_ratio = 0.05;
  double hold_ratio = 0.45;
  double poly_power = 2.0;
  double eps = 1e-8;
  std::int64_t total_steps = 0;

  void validate() const;
};

/// Warmup-Hold-Decay at a (possibly fractional) step: linear ramp from 0 to
/// lr_max, plateau at lr_max, then lr_min + (lr_max - lr_min) * ((T - t) /
/// (T - t_hold_end))^power down to lr_min at t = T.
double lr_at(double step, const OptimConfig& cfg);
inline double lr_at(std::int64_t step, const OptimConfig& cfg) { return lr_at(static_cast<double>(step), cfg); }

/// Layer-wise NovoGrad. One group per parameter tensor with a scalar second
/// moment; weight decay enters the momentum alongside the normalized
/// gradient. Batch-norm affine parameters are not decayed.
template <typename Scalar>
class NovoGrad {
 public:
  using Array = typename nn::Tensor<Scalar>::Array;

  struct GroupState {
    Array m;
    double v = 0.0;
    std::int64_t steps = 0;
  };

  explicit NovoGrad(OptimConfig cfg) : cfg_(std::move(cfg)) {}

  void step(std::span<Parameter<Scalar>> params, double lr) {
    if (state_.empty()) state_.resize(params.size());
    if (state_.size() != params.size())
      fail(ErrorCode::ShapeMismatch, "optimizer state does not match the parameter list");
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Array& g = params[i].tensor.grad();
      if (!g.allFinite()) fail(ErrorCode::NonFiniteGradient, "non-finite gradient in " + params[i].name);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      GroupState& s = state_[i];
      Array& w = p.tensor.data();
      const Array& g = p.tensor.grad();
      const double g2 = g.template cast<double>().square().sum();
      s.v = s.steps == 0 ? g2 : cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * g2;
      const auto denom = static_cast<Scalar>(std::sqrt(s.v) + cfg_.eps);
      const double wd = p.kind == ParamKind::BnAffine ? 0.0 : cfg_.weight_decay;
      if (s.m.size() == 0) s.m = Array::Zero(w.size());
      s.m = static_cast<Scalar>(cfg_.beta1) * s.m + (g / denom + static_cast<Scalar>(wd) * w);
      w -= static_cast<Scalar>(lr) * s.m;
      ++s.steps;
    }
  }

  const OptimConfig& config() const { return cfg_; }
  std::vector<GroupState>& state() { return state_; }
  const std::vector<GroupState>& state() const { return state_; }

 private:
  OptimConfig cfg_;
  std::vector<GroupState> state_;
};

}  // namespace matchbox
