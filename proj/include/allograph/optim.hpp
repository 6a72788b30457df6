// allograph/optim.hpp
//
// Copyright 2026 The Allograph Authors
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
//
// Adam with bias correction and an optional linear warmup on a constant
// learning rate. A step with any non-finite gradient is skipped and
// counted instead of corrupting the parameters.

#ifndef ALLOGRAPH_OPTIM_HPP_
#define ALLOGRAPH_OPTIM_HPP_

#include <cmath>
#include <map>
#include <string>

#include "allograph/common.hpp"
#include "allograph/encoder.hpp"
#include "allograph/tensor.hpp"

namespace allograph {

struct AdamConfig {
  double lr = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t warmup_steps = 0;
};

struct AdamSlot {
  Tensor m;
  Tensor v;
};

struct AdamState {
  std::map<std::string, AdamSlot> slots;
  std::size_t step = 0;
  std::size_t skipped = 0;

  double effective_lr(const AdamConfig& cfg) const {
    if (cfg.warmup_steps == 0) return cfg.lr;
    const double ratio = double(step) / double(cfg.warmup_steps);
    return cfg.lr * std::min(1.0, ratio);
  }
};

// Applies one Adam update to `param` in place. `lr_scale` lets parameter
// groups (for instance graph weights) run at a different rate.
inline void adam_update(const AdamConfig& cfg, AdamState& state,
                        const std::string& name, Tensor& param,
                        const Tensor& grad, double lr_scale = 1.0) {
  if (!param.same_shape(grad))
    throw_numeric("adam: gradient shape " + grad.shape_str() +
                  " does not match parameter '" + name + "'");
  AdamSlot& slot = state.slots[name];
  if (slot.m.data.empty()) {
    slot.m = Tensor::zeros(param.shape);
    slot.v = Tensor::zeros(param.shape);
  }
  const double lr = state.effective_lr(cfg) * lr_scale;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (std::size_t i = 0; i < param.data.size(); ++i) {
    const double g = grad.data[i];
    slot.m.data[i] = cfg.beta1 * slot.m.data[i] + (1.0 - cfg.beta1) * g;
    slot.v.data[i] = cfg.beta2 * slot.v.data[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = slot.m.data[i] / bc1;
    const double vhat = slot.v.data[i] / bc2;
    param.data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

// One synchronized step over a whole gradient map. `params` lists every
// trainable tensor by name in a deterministic order. Returns false (and
// counts the event) when any gradient is non-finite.
inline bool adam_step(const AdamConfig& cfg, AdamState& state,
                      const std::vector<std::pair<std::string, Tensor*>>& params,
                      const std::map<std::string, Tensor>& grads,
                      const std::map<std::string, double>& lr_scales = {}) {
  for (const auto& [name, g] : grads)
    if (!g.all_finite()) {
      ++state.skipped;
      return false;
    }
  ++state.step;
  for (const auto& [name, tensor] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    auto sc = lr_scales.find(name);
    adam_update(cfg, state, name, *tensor, it->second,
                sc == lr_scales.end() ? 1.0 : sc->second);
  }
  return true;
}

}  // namespace allograph

#endif  // ALLOGRAPH_OPTIM_HPP_
