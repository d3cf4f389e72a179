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

// Discrete-event simulation of one MoE layer on three streams (compute,
// collective, copy). A Schedule is a DAG of per-partition operations with a
// FIFO issue order per stream and buffer-pool slot constraints; simulate()
// executes it with interference-dependent rates.

#pragma once

#include <array>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "moesim/core.h"
#include "moesim/memmodel.h"

namespace moesim {

using OpId = int;
using PoolId = int;

enum class OpKind {
  kDispatch,       // S: first all-to-all (backward: gradient of S)
  kExpertCompute,  // C: both expert GeMMs
  kCombine,        // R: second all-to-all (backward: gradient of R)
  kOffloadCopy,    // D: device-to-host
  kPrefetchCopy,   // H: host-to-device
  kRecompute,      // first GeMM again to restore T_M
  kRecommunicate,  // all-to-all again to restore T_DI
  kGradCompute,    // backward GeMMs of one expert linear layer
};
std::string_view op_kind_name(OpKind kind);

enum class ScheduleScope { kForward, kBackward, kStep };
std::string_view scope_name(ScheduleScope scope);

enum class MemoryCategory { kActivation, kBuffer };

/// Whether a materialized slot is returned to the device when released.
enum class SlotLifetime {
  kStep,       // held until the end of the simulated pass
  kTransient,  // freed when its last consumer finishes
};

struct BufferPool {
  PoolId id = 0;
  TensorRole role = TensorRole::kInput;
  bool gradient = false;
  MemoryCategory category = MemoryCategory::kActivation;
  int capacity = 1;  // simultaneously live partition slots
  Count width = 1;   // elements per token
  SlotLifetime lifetime = SlotLifetime::kStep;
  /// Slots already materialized when the pool's first pass starts
  /// (tokens per slot), e.g. forward tensors seen by a backward-only run.
  std::vector<Count> preloaded_slots;
  Direction preload_direction = Direction::kForward;
  std::string name;
};

/// One occupancy of a pool slot: live from the first producer's start (or
/// the pass start if there is no producer) until every consumer finished.
struct PoolUse {
  PoolId pool = 0;
  int slot = 0;
  int partition = 0;
  Count tokens = 0;
  Direction direction = Direction::kForward;
  std::vector<OpId> producers;
  std::vector<OpId> consumers;
};

struct OpNode {
  OpId id = 0;
  int partition = 0;
  OpKind kind = OpKind::kDispatch;
  StreamKind stream = StreamKind::kCompute;
  Direction direction = Direction::kForward;
  int units = 1;       // multiples of the per-kind base volume
  double work = 0.0;   // units * base volume for this partition's tokens
  Count tokens = 0;
  /// Data dependencies plus buffer-slot edges.
  std::vector<OpId> deps;
  /// Tensor copied by D/H ops (kInput otherwise).
  TensorRole tensor = TensorRole::kInput;
  std::string label;
};

using StreamOrders = std::array<std::vector<OpId>, 3>;

class Schedule {
 public:
  Schedule(ModelSpec spec, BatchSpec batch, ReuseStrategy strategy,
           bool reuse_enabled, ScheduleScope scope)
      : spec_(spec),
        batch_(batch),
        strategy_(strategy),
        reuse_(reuse_enabled),
        scope_(scope) {}

  const ModelSpec& spec() const { return spec_; }
  const BatchSpec& batch() const { return batch_; }
  ReuseStrategy strategy() const { return strategy_; }
  bool reuse_enabled() const { return reuse_; }
  ScheduleScope scope() const { return scope_; }

  const std::vector<OpNode>& ops() const { return ops_; }
  const OpNode& op(OpId id) const { return ops_.at(static_cast<size_t>(id)); }
  const std::vector<BufferPool>& pools() const { return pools_; }
  const std::vector<PoolUse>& uses() const { return uses_; }
  const StreamOrders& stream_orders() const { return orders_; }
  const std::vector<OpId>& stream_order(StreamKind k) const {
    return orders_[static_cast<int>(k)];
  }
  std::size_t size() const { return ops_.size(); }

 private:
  friend class ScheduleBuilder;
  friend Schedule make_empty_schedule(const ModelSpec&, const BatchSpec&);

  ModelSpec spec_;
  BatchSpec batch_;
  ReuseStrategy strategy_;
  bool reuse_;
  ScheduleScope scope_;
  std::vector<OpNode> ops_;
  std::vector<BufferPool> pools_;
  std::vector<PoolUse> uses_;
  StreamOrders orders_;
};

/// Builds the per-partition DAG. With reuse, T_DI/T_DO (and their
/// gradients) cycle through 2 slots and T_M through 1; otherwise each
/// partition owns a slot. Throws kReuseNotApplicable when reuse is requested
/// with fewer than 2 partitions, kInvalidArgument when the strategy and the
/// reuse flag disagree, and kScheduleConstruction on a deadlock.
Schedule build_schedule(const ModelSpec& spec, const BatchSpec& batch,
                        ReuseStrategy strategy, bool reuse_enabled,
                        ScheduleScope scope);
Schedule build_schedule(const ModelSpec& spec, const BatchSpec& batch,
                        ReuseStrategy strategy, bool reuse_enabled,
                        Direction direction);

/// A schedule with no operations.
Schedule make_empty_schedule(const ModelSpec& spec, const BatchSpec& batch);

/// Throws kScheduleConstruction if deps plus stream order contain a cycle.
void check_acyclic(const Schedule& schedule);

struct RateSegment {
  double start = 0.0;
  double end = 0.0;
  double rate = 0.0;
};

struct OpEvent {
  OpId op = 0;
  StreamKind stream = StreamKind::kCompute;
  double start = 0.0;       // issue time, launch overhead starts here
  double exec_start = 0.0;  // launch overhead paid
  double end = 0.0;
  std::vector<RateSegment> segments;
};

class Trace {
 public:
  Trace() = default;
  explicit Trace(std::vector<OpEvent> events) : events_(std::move(events)) {}

  const std::vector<OpEvent>& events() const { return events_; }
  const OpEvent& event(OpId id) const {
    return events_.at(static_cast<size_t>(id));
  }
  double makespan() const;
  /// Sum of op durations (launch included) on one stream.
  double busy_time(StreamKind kind) const;

 private:
  std::vector<OpEvent> events_;
};

/// Runs the schedule with its own stream orders.
Trace simulate(const Schedule& schedule, const HardwareProfile& hw);

/// Runs the schedule with the given per-stream issue orders; std::nullopt if
/// they deadlock against the dependencies.
std::optional<Trace> simulate_with_orders(const Schedule& schedule,
                                          const HardwareProfile& hw,
                                          const StreamOrders& orders);

double makespan(const Trace& trace);

/// Largest schedule the exhaustive oracle accepts.
inline constexpr std::size_t kOracleMaxOps = 12;

/// Minimum makespan over every dependency-consistent per-stream issue order.
/// Throws kOracleSize above kOracleMaxOps operations.
double brute_force_makespan(const Schedule& schedule,
                            const HardwareProfile& hw);

struct MemorySample {
  double time = 0.0;
  Count activations = 0;
  Count buffers = 0;
};

struct MemoryProfile {
  Count model_states = 0;
  Count peak_activations = 0;
  Count peak_buffers = 0;
  /// Peak of activations + buffers at a single instant.
  Count peak_combined = 0;
  /// Host-side copies of offloaded tensors; not part of device memory.
  Count peak_host = 0;
  std::vector<MemorySample> curve;
  int element_bytes = 2;

  /// Model states plus the per-category peaks.
  MemoryReport report() const;
};

MemoryProfile measure_memory(const Schedule& schedule, const Trace& trace);

/// Model states + peak activations + peak buffers (elements).
Count peak_memory(const Schedule& schedule, const Trace& trace);

struct Validity {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

/// Replays a trace: no same-stream overlap, FIFO issue order, dependencies
/// respected, pool capacities never exceeded, and the integral of each op's
/// rate equals its work within `work_tolerance` relative.
Validity check_trace(const Schedule& schedule, const Trace& trace,
                     double work_tolerance = 1e-9);

}  // namespace moesim
