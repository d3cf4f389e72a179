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

#include "moesim/costmodel.h"

#include <algorithm>
#include <cmath>

namespace moesim {

BaseVolumes base_volumes(const ModelSpec& spec, Count micro_batch) {
  if (micro_batch < 1) {
    throw Error(ErrorCode::kInvalidArgument, "micro-batch size must be >= 1");
  }
  const double b = static_cast<double>(micro_batch);
  const double m = static_cast<double>(spec.model_dim());
  const double h = static_cast<double>(spec.hidden_dim());
  return {b * h * m, b * m, b * m};
}

StreamFactors stream_factors(const HardwareProfile& hw,
                             ReuseStrategy strategy) {
  const SlowdownTable& s = hw.slowdown;
  StreamFactors f;
  if (strategy.mu_mode() == MuMode::kComp) {
    f.mu = s.mu_comp();
    f.sigma = s.sigma_comm();
  } else {
    f.mu = s.mu_all();
    f.sigma = s.sigma_all();
  }
  f.eta = strategy.eta_mode() == EtaMode::kAll ? s.eta_all() : 1.0;
  return f;
}

CostBreakdown stage_cost(const ModelSpec& spec, const HardwareProfile& hw,
                         Count micro_batch, ReuseStrategy strategy,
                         Direction direction) {
  const BaseVolumes v = base_volumes(spec, micro_batch);
  const Workload q =
      direction == Direction::kForward ? strategy.q_fw() : strategy.q_bw();
  const StreamFactors f = stream_factors(hw, strategy);
  const double comp_speed =
      f.sigma * hw.w_comp * hw.saturation(static_cast<double>(micro_batch));

  CostBreakdown c;
  c.direction = direction;
  c.t_comp = q[0] * v.comp / comp_speed;
  c.t_comm = q[1] * v.comm / (f.mu * hw.w_comm);
  c.t_mem = q[2] == 0 ? 0.0 : q[2] * v.mem / (f.eta * hw.w_mem);
  c.c_total = std::max({c.t_comp, c.t_comm, c.t_mem});
  return c;
}

double alpha(const HardwareProfile& hw) { return hw.w_comp / hw.w_comm; }
double beta(const HardwareProfile& hw) { return hw.w_comp / hw.w_mem; }

StrategyCost strategy_cost(const ModelSpec& spec, const HardwareProfile& hw,
                           Count micro_batch, ReuseStrategy strategy,
                           DirectionWeights weights) {
  StrategyCost sc;
  sc.strategy = strategy;
  sc.forward = stage_cost(spec, hw, micro_batch, strategy, Direction::kForward);
  sc.backward =
      stage_cost(spec, hw, micro_batch, strategy, Direction::kBackward);
  sc.total = weights.forward * sc.forward.c_total +
             weights.backward * sc.backward.c_total;
  return sc;
}

StrategySelection select_strategy(const ModelSpec& spec,
                                  const HardwareProfile& hw, Count micro_batch,
                                  DirectionWeights weights) {
  StrategySelection sel;
  const auto kinds = ReuseStrategy::reusing();
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    sel.candidates[i] =
        strategy_cost(spec, hw, micro_batch, ReuseStrategy(kinds[i]), weights);
  }
  sel.no_reuse = strategy_cost(spec, hw, micro_batch, ReuseStrategy(), weights);

  // Walk S4 -> S1 and only switch on a strictly (beyond rounding) lower cost.
  const StrategyCost* best = &sel.candidates[3];
  for (int i = 2; i >= 0; --i) {
    const StrategyCost& c = sel.candidates[i];
    if (c.total < best->total * (1.0 - 1e-12)) best = &c;
  }
  sel.chosen = best->strategy;
  sel.forward = best->forward;
  sel.backward = best->backward;
  return sel;
}

}  // namespace moesim
