// Copyright 2026 The tumorseg Authors
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

#include "tumorseg/optimizer.hpp"

#include <cmath>

#include "tumorseg/error.hpp"

namespace tumorseg {

Adam::Adam(ParameterGroups groups, AdamConfig cfg)
    : groups_(std::move(groups)), cfg_(cfg) {
  require(cfg_.beta1 >= 0 && cfg_.beta1 < 1 && cfg_.beta2 >= 0 && cfg_.beta2 < 1 &&
              cfg_.eps > 0,
          ErrorCode::kInvalidArgument, "invalid Adam coefficients");
  for (const ParameterGroup* g : {&groups_.encoder, &groups_.decoder}) {
    for (Parameter* p : g->params) {
      slots_.push_back({p, g->lr, std::vector<float>(p->size(), 0.0f),
                        std::vector<float>(p->size(), 0.0f)});
    }
  }
}

void Adam::step() {
  ++step_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (Slot& s : slots_) {
    const auto step_size = static_cast<float>(s.lr / c1);
    const auto inv_c2 = static_cast<float>(1.0 / c2);
    const auto fb1 = static_cast<float>(b1);
    const auto fb2 = static_cast<float>(b2);
    const auto eps = static_cast<float>(cfg_.eps);
    float* w = s.param->value.data();
    const float* g = s.param->grad.data();
    float* m = s.m.data();
    float* v = s.v.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(s.param->size());
#pragma omp parallel for schedule(static) if (n > 65536)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      m[i] = fb1 * m[i] + (1.0f - fb1) * g[i];
      v[i] = fb2 * v[i] + (1.0f - fb2) * g[i] * g[i];
      w[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
  }
}

}  // namespace tumorseg
