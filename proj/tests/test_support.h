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

// Shared fixtures: hardware profiles and seeded random generators for the
// hand-rolled property tests.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "moesim/core.h"

namespace moesim::testing {

/// Profile with unit slowdowns and no launch overhead, so stream rates never
/// depend on concurrency. `alpha` = W_comp/W_comm, `beta` = W_comp/W_mem.
inline HardwareProfile quiet_profile(double alpha, double beta,
                                     double w_comp = 1.0e13) {
  HardwareProfile hw;
  hw.w_comp = w_comp;
  hw.w_comm = w_comp / alpha;
  hw.w_mem = w_comp / beta;
  hw.set_launch_overhead(0.0);
  hw.compute_saturation = 1.0;
  return hw;
}

/// Every multi-stream entry of the table set to one value per kind.
inline void set_uniform_slowdown(HardwareProfile& hw, double compute,
                                 double collective, double copy) {
  const double f[3] = {compute, collective, copy};
  for (StreamKind k : kAllStreams) {
    for (unsigned bits = 1; bits < 8; ++bits) {
      const KindSet others = KindSet::from_bits(bits).without(k);
      if (!others.empty()) hw.slowdown.set(k, others, f[static_cast<int>(k)]);
    }
  }
}

/// Communication-heavy profile with interference, used for the pipeline
/// speedup and granularity tests.
inline HardwareProfile comm_bound_profile(double launch = 50e-6) {
  HardwareProfile hw;
  hw.w_comp = 1.0e14;
  hw.w_comm = 2.5e10;
  hw.w_mem = 1.2e10;
  hw.set_launch_overhead(launch);
  hw.compute_saturation = 1024.0;
  hw.slowdown.set(StreamKind::kCollective, {StreamKind::kCompute}, 0.8);
  return hw;
}

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  Count integer(Count lo, Count hi) {
    return std::uniform_int_distribution<Count>(lo, hi)(rng_);
  }
  double real(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double log_real(double lo, double hi) {
    return std::exp(real(std::log(lo), std::log(hi)));
  }
  bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<size_t>(integer(0, static_cast<Count>(v.size()) - 1))];
  }

  ModelSpec model() {
    const Count nodes = pick(std::vector<Count>{1, 2, 4, 8});
    return ModelSpec(integer(1, 64) * 16, integer(1, 64) * 32,
                     nodes * integer(1, 8), nodes);
  }

  ReuseStrategy strategy() {
    return ReuseStrategy(
        static_cast<ReuseStrategy::Kind>(integer(0, 4)));
  }

  HardwareProfile profile() {
    HardwareProfile hw;
    hw.w_comp = log_real(1e11, 1e15);
    hw.w_comm = log_real(1e8, 1e12);
    hw.w_mem = log_real(1e8, 1e12);
    for (StreamKind k : kAllStreams) {
      hw.launch_overhead[static_cast<int>(k)] = coin() ? 0.0 : real(0.0, 1e-4);
    }
    hw.compute_saturation = coin() ? 1.0 : real(1.0, 4096.0);
    for (StreamKind k : kAllStreams) {
      for (unsigned bits = 1; bits < 8; ++bits) {
        const KindSet others = KindSet::from_bits(bits).without(k);
        if (!others.empty() && coin(0.7)) {
          hw.slowdown.set(k, others, real(0.3, 1.0));
        }
      }
    }
    return hw;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace moesim::testing
