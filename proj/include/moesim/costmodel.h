/* Copyright 2026 The moesim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Analytical per-micro-batch cost of a pipelined MoE layer: each stream's
// time is its workload divided by its interference-adjusted speed and the
// stage cost is the slowest stream. Also picks the cheapest reuse strategy.

#pragma once

#include <array>
#include <vector>

#include "moesim/core.h"

namespace moesim {

/// Per-unit volumes of one micro-batch of b tokens.
struct BaseVolumes {
  double comp = 0.0;  // b H M element-operations (one GeMM)
  double comm = 0.0;  // b M elements (one all-to-all)
  double mem = 0.0;   // b M elements (one T_DI copy)
};

BaseVolumes base_volumes(const ModelSpec& spec, Count micro_batch);

struct CostBreakdown {
  double t_comp = 0.0;
  double t_comm = 0.0;
  double t_mem = 0.0;
  double c_total = 0.0;  // max of the three
  Direction direction = Direction::kForward;
};

/// Interference multipliers a strategy runs under, looked up from the
/// profile according to the strategy's mu/eta modes.
struct StreamFactors {
  double sigma = 1.0;
  double mu = 1.0;
  double eta = 1.0;
};
StreamFactors stream_factors(const HardwareProfile& hw, ReuseStrategy strategy);

CostBreakdown stage_cost(const ModelSpec& spec, const HardwareProfile& hw,
                         Count micro_batch, ReuseStrategy strategy,
                         Direction direction);

/// W_comp / W_comm
double alpha(const HardwareProfile& hw);
/// W_comp / W_mem
double beta(const HardwareProfile& hw);

struct StrategyCost {
  ReuseStrategy strategy;
  CostBreakdown forward;
  CostBreakdown backward;
  double total = 0.0;  // weighted forward + backward
};

struct DirectionWeights {
  double forward = 1.0;
  double backward = 1.0;
};

StrategyCost strategy_cost(const ModelSpec& spec, const HardwareProfile& hw,
                           Count micro_batch, ReuseStrategy strategy,
                           DirectionWeights weights = {});

struct StrategySelection {
  ReuseStrategy chosen;
  CostBreakdown forward;
  CostBreakdown backward;
  /// S1..S4 in order.
  std::array<StrategyCost, 4> candidates;
  /// Reported for comparison only; never selected.
  StrategyCost no_reuse;
};

/// Argmin of weighted forward + backward cost over S1..S4. Ties (within
/// 1e-12 relative) resolve in the order S4, S3, S2, S1.
StrategySelection select_strategy(const ModelSpec& spec,
                                  const HardwareProfile& hw, Count micro_batch,
                                  DirectionWeights weights = {});

}  // namespace moesim
