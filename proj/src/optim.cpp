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

#include "matchbox/optim.h"

namespace matchbox {

void OptimConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorCode::InvalidConfig, what);
  };
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "betas must lie in [0, 1)");
  require(warmup_ratio >= 0 && hold_ratio >= 0 && warmup_ratio + hold_ratio <= 1,
          "warmup and hold ratios must be non-negative and sum to at most 1");
  require(lr_min >= 0 && lr_min <= lr_max, "need 0 <= lr_min <= lr_max");
  require(weight_decay >= 0 && eps > 0 && poly_power > 0, "bad weight decay, eps or power");
  require(total_steps >= 0, "total_steps must be non-negative");
}

double lr_at(double step, const OptimConfig& cfg) {
  const auto total = static_cast<double>(cfg.total_steps);
  if (!(step >= 0.0 && step <= total))
    fail(ErrorCode::StepOutOfRange, "step " + std::to_string(step) + " outside [0, " +
                                        std::to_string(cfg.total_steps) + "]");
  const double warmup_end = cfg.warmup_ratio * total;
  const double hold_end = (cfg.warmup_ratio + cfg.hold_ratio) * total;
  if (step < warmup_end) return cfg.lr_max * step / warmup_end;
  if (step < hold_end) return cfg.lr_max;
  const double span = total - hold_end;
  if (span <= 0.0) return cfg.lr_min;
  const double frac = (total - step) / span;
  return cfg.lr_min + (cfg.lr_max - cfg.lr_min) * std::pow(frac, cfg.poly_power);
}

}  // namespace matchbox
