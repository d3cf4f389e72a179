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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "moesim/pipesim.h"

namespace moesim {

MemoryReport MemoryProfile::report() const {
  MemoryReport r;
  r.model_states = model_states;
  r.activations = peak_activations;
  r.buffers = peak_buffers;
  r.total = model_states + peak_activations + peak_buffers;
  r.element_bytes = element_bytes;
  return r;
}

MemoryProfile measure_memory(const Schedule& schedule, const Trace& trace) {
  struct Change {
    double time;
    MemoryCategory category;
    Count delta;
  };
  std::vector<Change> changes;
  const auto& pools = schedule.pools();

  std::array<double, 2> pass_start = {std::numeric_limits<double>::infinity(),
                                      std::numeric_limits<double>::infinity()};
  for (const OpNode& op : schedule.ops()) {
    double& ps = pass_start[static_cast<int>(op.direction)];
    ps = std::min(ps, trace.event(op.id).start);
  }
  for (double& ps : pass_start) {
    if (!std::isfinite(ps)) ps = 0.0;
  }

  // Materialized size per (pool, slot); a slot only grows.
  std::map<std::pair<PoolId, int>, Count> materialized;
  for (const BufferPool& p : pools) {
    const double t = pass_start[static_cast<int>(p.preload_direction)];
    for (size_t s = 0; s < p.preloaded_slots.size(); ++s) {
      const Count elems = p.preloaded_slots[s] * p.width;
      materialized[{p.id, static_cast<int>(s)}] = elems;
      changes.push_back({t, p.category, elems});
    }
  }

  struct Acquire {
    double time;
    size_t use;
  };
  std::vector<Acquire> acquires;
  for (size_t u = 0; u < schedule.uses().size(); ++u) {
    const PoolUse& use = schedule.uses()[u];
    double t = pass_start[static_cast<int>(use.direction)];
    if (!use.producers.empty()) {
      t = std::numeric_limits<double>::infinity();
      for (OpId p : use.producers) t = std::min(t, trace.event(p).start);
    }
    acquires.push_back({t, u});
  }
  std::stable_sort(acquires.begin(), acquires.end(),
                   [](const Acquire& a, const Acquire& b) {
                     return a.time < b.time;
                   });

  for (const Acquire& a : acquires) {
    const PoolUse& use = schedule.uses()[a.use];
    const BufferPool& pool = pools[static_cast<size_t>(use.pool)];
    const Count elems = use.tokens * pool.width;
    if (pool.lifetime == SlotLifetime::kTransient) {
      changes.push_back({a.time, pool.category, elems});
      double release = std::numeric_limits<double>::infinity();
      if (!use.consumers.empty()) {
        release = 0.0;
        for (OpId c : use.consumers) {
          release = std::max(release, trace.event(c).end);
        }
      }
      if (std::isfinite(release)) {
        changes.push_back({release, pool.category, -elems});
      }
      continue;
    }
    Count& have = materialized[{pool.id, use.slot}];
    if (elems > have) {
      changes.push_back({a.time, pool.category, elems - have});
      have = elems;
    }
  }

  std::stable_sort(changes.begin(), changes.end(),
                   [](const Change& a, const Change& b) {
                     if (a.time != b.time) return a.time < b.time;
                     return a.delta < b.delta;  // frees before allocations
                   });

  MemoryProfile prof;
  prof.model_states = mem_model_states(schedule.spec());
  prof.element_bytes = schedule.spec().element_bytes();
  Count act = 0;
  Count buf = 0;
  for (size_t i = 0; i < changes.size(); ++i) {
    const Change& c = changes[i];
    (c.category == MemoryCategory::kActivation ? act : buf) += c.delta;
    prof.peak_activations = std::max(prof.peak_activations, act);
    prof.peak_buffers = std::max(prof.peak_buffers, buf);
    prof.peak_combined = std::max(prof.peak_combined, act + buf);
    const bool last_at_time =
        i + 1 == changes.size() || changes[i + 1].time != c.time;
    if (last_at_time) prof.curve.push_back({c.time, act, buf});
  }

  // Host copies: an offloaded partition lives on the host from the end of
  // its offload until the end of the matching prefetch.
  std::vector<std::pair<double, Count>> host;
  for (const OpNode& op : schedule.ops()) {
    if (op.kind != OpKind::kOffloadCopy && op.kind != OpKind::kPrefetchCopy) {
      continue;
    }
    const Count elems = role_elements(schedule.spec(), op.tensor, op.tokens);
    const double t = trace.event(op.id).end;
    host.emplace_back(t, op.kind == OpKind::kOffloadCopy ? elems : -elems);
  }
  std::sort(host.begin(), host.end());
  Count live = 0;
  if (schedule.scope() == ScheduleScope::kBackward) {
    // Offloaded by an earlier forward pass.
    for (const auto& [t, d] : host) live -= d;
    prof.peak_host = live;
  }
  for (const auto& [t, d] : host) {
    live += d;
    prof.peak_host = std::max(prof.peak_host, live);
  }
  return prof;
}

Count peak_memory(const Schedule& schedule, const Trace& trace) {
  return measure_memory(schedule, trace).report().total;
}

}  // namespace moesim
