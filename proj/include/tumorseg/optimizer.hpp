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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tumorseg/network.hpp"

namespace tumorseg {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with one learning rate per parameter group.
class Adam {
 public:
  Adam(ParameterGroups groups, AdamConfig cfg = {});

  /// Applies one update from the accumulated gradients.
  void step();

  std::int64_t step_count() const { return step_; }
  void set_step_count(std::int64_t step) { step_ = step; }
  const ParameterGroups& groups() const { return groups_; }

  struct Slot {
    Parameter* param = nullptr;
    double lr = 0;
    std::vector<float> m;
    std::vector<float> v;
  };
  std::vector<Slot>& slots() { return slots_; }
  const std::vector<Slot>& slots() const { return slots_; }

 private:
  ParameterGroups groups_;
  AdamConfig cfg_;
  std::vector<Slot> slots_;
  std::int64_t step_ = 0;
};

}  // namespace tumorseg
