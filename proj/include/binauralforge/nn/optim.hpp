// Copyright 2026 The BinauralForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BINAURALFORGE_NN_OPTIM_HPP
#define BINAURALFORGE_NN_OPTIM_HPP

#include <vector>

#include "binauralforge/nn/layers.hpp"

namespace bf::nn {

struct OptimizerConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW) when nonzero
  // Linear schedule: lr scaled from 1 down to 0 over total_steps (0 = constant).
  int64_t total_steps = 0;
};

// Adam with optional decoupled weight decay (AdamW) and a linear lr schedule.
template <class T>
class AdamW {
 public:
  AdamW(ParamRegistry<T>& reg, OptimizerConfig cfg)
      : reg_(reg), cfg_(cfg) {
    for (auto& [name, t] : reg_.params) {
      m_.emplace_back(t.size(), T(0));
      v_.emplace_back(t.size(), T(0));
    }
  }

  double current_lr() const {
    if (cfg_.total_steps <= 0) return cfg_.lr;
    const double frac =
        1.0 - static_cast<double>(std::min(step_, cfg_.total_steps)) /
                  static_cast<double>(cfg_.total_steps);
    return cfg_.lr * frac;
  }

  void step() {
    const double lr = current_lr();
    ++step_;
    const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
    const T bc1 = static_cast<T>(1.0 - std::pow(cfg_.beta1, step_));
    const T bc2 = static_cast<T>(1.0 - std::pow(cfg_.beta2, step_));
    for (size_t p = 0; p < reg_.params.size(); ++p) {
      auto& t = reg_.params[p].second;
      auto& val = t.values();
      auto& g = t.grad();
      auto& m = m_[p];
      auto& v = v_[p];
      const T wd = static_cast<T>(cfg_.weight_decay);
      for (size_t i = 0; i < val.size(); ++i) {
        if (wd != T(0)) val[i] -= static_cast<T>(lr) * wd * val[i];
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        val[i] -= static_cast<T>(lr) * mhat /
                  (std::sqrt(vhat) + static_cast<T>(cfg_.eps));
      }
    }
  }

  int64_t steps_taken() const { return step_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  ParamRegistry<T>& reg_;
  OptimizerConfig cfg_;
  int64_t step_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

template <class T>
AdamW<T> make_adam(ParamRegistry<T>& reg, const OptimizerConfig& cfg) {
  return AdamW<T>(reg, cfg);
}

// Plain Adam = AdamW with zero weight decay.
template <class T>
AdamW<T> make_adam(ParamRegistry<T>& reg, double lr) {
  OptimizerConfig cfg;
  cfg.lr = lr;
  cfg.weight_decay = 0.0;
  return AdamW<T>(reg, cfg);
}

}  // namespace bf::nn

#endif  // BINAURALFORGE_NN_OPTIM_HPP
