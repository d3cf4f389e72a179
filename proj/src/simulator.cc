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
#include <functional>
#include <limits>
#include <string>

#include "moesim/pipesim.h"

namespace moesim {

double Trace::makespan() const {
  double m = 0.0;
  for (const OpEvent& e : events_) m = std::max(m, e.end);
  return m;
}

double Trace::busy_time(StreamKind kind) const {
  double t = 0.0;
  for (const OpEvent& e : events_) {
    if (e.stream == kind) t += e.end - e.start;
  }
  return t;
}

double makespan(const Trace& trace) { return trace.makespan(); }

namespace {

enum class Phase { kPending, kLaunching, kRunning, kDone };

double op_rate(const OpNode& op, const HardwareProfile& hw, KindSet active) {
  double rate = hw.base_speed(op.stream) *
                hw.slowdown.factor(op.stream, active.without(op.stream));
  if (op.stream == StreamKind::kCompute) {
    rate *= hw.saturation(static_cast<double>(op.tokens));
  }
  return rate;
}

}  // namespace

std::optional<Trace> simulate_with_orders(const Schedule& schedule,
                                          const HardwareProfile& hw,
                                          const StreamOrders& orders) {
  const auto& ops = schedule.ops();
  const size_t n = ops.size();
  std::vector<OpEvent> events(n);
  std::vector<Phase> phase(n, Phase::kPending);
  std::vector<double> remaining(n, 0.0);
  std::vector<double> launch_end(n, 0.0);
  std::vector<int> deps_left(n, 0);
  std::vector<std::vector<OpId>> dependents(n);
  for (const OpNode& op : ops) {
    deps_left[static_cast<size_t>(op.id)] = static_cast<int>(op.deps.size());
    for (OpId d : op.deps) dependents[static_cast<size_t>(d)].push_back(op.id);
    events[static_cast<size_t>(op.id)].op = op.id;
    events[static_cast<size_t>(op.id)].stream = op.stream;
    remaining[static_cast<size_t>(op.id)] = op.work;
  }

  std::array<size_t, 3> head = {0, 0, 0};
  std::array<OpId, 3> running = {-1, -1, -1};
  size_t done = 0;
  double now = 0.0;

  while (done < n) {
    for (StreamKind k : kAllStreams) {
      const int s = static_cast<int>(k);
      if (running[s] != -1 || head[s] >= orders[s].size()) continue;
      const OpId id = orders[s][head[s]];
      const size_t i = static_cast<size_t>(id);
      if (deps_left[i] > 0) continue;
      ++head[s];
      running[s] = id;
      events[i].start = now;
      const double eps = hw.launch(k);
      if (eps > 0.0) {
        phase[i] = Phase::kLaunching;
        launch_end[i] = now + eps;
      } else {
        phase[i] = Phase::kRunning;
        events[i].exec_start = now;
      }
    }

    KindSet active;
    bool any = false;
    for (StreamKind k : kAllStreams) {
      const OpId id = running[static_cast<int>(k)];
      if (id == -1) continue;
      any = true;
      if (phase[static_cast<size_t>(id)] == Phase::kRunning) {
        active = active.with(k);
      }
    }
    if (!any) return std::nullopt;  // remaining ops wait on each other

    // Find the next boundary: a launch finishing or an op completing.
    std::array<double, 3> rate = {0.0, 0.0, 0.0};
    double dt = std::numeric_limits<double>::infinity();
    int first = -1;
    for (StreamKind k : kAllStreams) {
      const int s = static_cast<int>(k);
      const OpId id = running[s];
      if (id == -1) continue;
      const size_t i = static_cast<size_t>(id);
      double until;
      if (phase[i] == Phase::kLaunching) {
        until = launch_end[i] - now;
      } else {
        rate[s] = op_rate(ops[i], hw, active);
        until = remaining[i] / rate[s];
      }
      if (until < dt) {
        dt = until;
        first = s;
      }
    }
    const OpId first_id = running[first];
    const double next = phase[static_cast<size_t>(first_id)] ==
                                Phase::kLaunching
                            ? launch_end[static_cast<size_t>(first_id)]
                            : now + dt;

    for (StreamKind k : kAllStreams) {
      const int s = static_cast<int>(k);
      const OpId id = running[s];
      if (id == -1) continue;
      const size_t i = static_cast<size_t>(id);
      if (phase[i] == Phase::kRunning) {
        if (next > now) {
          auto& segs = events[i].segments;
          if (!segs.empty() && segs.back().rate == rate[s] &&
              segs.back().end == now) {
            segs.back().end = next;
          } else {
            segs.push_back({now, next, rate[s]});
          }
        }
        remaining[i] -= rate[s] * (next - now);
        const bool finished =
            s == first || remaining[i] <= ops[i].work * 1e-12;
        if (finished) {
          remaining[i] = 0.0;
          phase[i] = Phase::kDone;
          events[i].end = next;
          running[s] = -1;
          ++done;
          for (OpId d : dependents[i]) --deps_left[static_cast<size_t>(d)];
        }
      } else if (phase[i] == Phase::kLaunching &&
                 (s == first || launch_end[i] <= next)) {
        phase[i] = Phase::kRunning;
        events[i].exec_start = launch_end[i];
      }
    }
    now = next;
  }
  return Trace(std::move(events));
}

Trace simulate(const Schedule& schedule, const HardwareProfile& hw) {
  auto trace = simulate_with_orders(schedule, hw, schedule.stream_orders());
  if (!trace) {
    throw Error(ErrorCode::kScheduleConstruction,
                "schedule deadlocked during simulation");
  }
  return std::move(*trace);
}

double brute_force_makespan(const Schedule& schedule,
                            const HardwareProfile& hw) {
  const size_t n = schedule.size();
  if (n > kOracleMaxOps) {
    throw Error(ErrorCode::kOracleSize,
                "exhaustive oracle accepts at most " +
                    std::to_string(kOracleMaxOps) + " ops, got " +
                    std::to_string(n));
  }
  if (n == 0) return 0.0;

  // reach[a] has bit b set if b transitively depends on a.
  std::vector<unsigned> preds(n, 0);
  for (const OpNode& op : schedule.ops()) {
    for (OpId d : op.deps) preds[static_cast<size_t>(op.id)] |= 1u << d;
  }
  for (bool changed = true; changed;) {
    changed = false;
    for (size_t i = 0; i < n; ++i) {
      unsigned closure = preds[i];
      for (size_t j = 0; j < n; ++j) {
        if (preds[i] & (1u << j)) closure |= preds[j];
      }
      if (closure != preds[i]) {
        preds[i] = closure;
        changed = true;
      }
    }
  }

  // Every dependency-consistent permutation of each stream's ops.
  std::array<std::vector<std::vector<OpId>>, 3> choices;
  for (StreamKind k : kAllStreams) {
    const auto& ops = schedule.stream_order(k);
    auto& out = choices[static_cast<int>(k)];
    std::vector<OpId> current;
    unsigned placed = 0;
    std::function<void()> extend = [&]() {
      if (current.size() == ops.size()) {
        out.push_back(current);
        return;
      }
      for (OpId id : ops) {
        const unsigned bit = 1u << id;
        if (placed & bit) continue;
        // Same-stream predecessors must already be placed.
        bool ok = true;
        for (OpId other : ops) {
          if (other != id && (preds[static_cast<size_t>(id)] & (1u << other)) &&
              !(placed & (1u << other))) {
            ok = false;
            break;
          }
        }
        if (!ok) continue;
        placed |= bit;
        current.push_back(id);
        extend();
        current.pop_back();
        placed &= ~bit;
      }
    };
    extend();
  }

  double best = std::numeric_limits<double>::infinity();
  StreamOrders orders;
  for (const auto& a : choices[0]) {
    orders[0] = a;
    for (const auto& b : choices[1]) {
      orders[1] = b;
      for (const auto& c : choices[2]) {
        orders[2] = c;
        if (auto trace = simulate_with_orders(schedule, hw, orders)) {
          best = std::min(best, trace->makespan());
        }
      }
    }
  }
  return best;
}

Validity check_trace(const Schedule& schedule, const Trace& trace,
                     double work_tolerance) {
  Validity v;
  auto fail = [&](std::string msg) { v.violations.push_back(std::move(msg)); };
  const auto& ops = schedule.ops();
  if (trace.events().size() != ops.size()) {
    fail("trace has " + std::to_string(trace.events().size()) +
         " events for " + std::to_string(ops.size()) + " ops");
    return v;
  }
  constexpr double kTimeSlack = 1e-12;

  for (StreamKind k : kAllStreams) {
    const auto& order = schedule.stream_order(k);
    for (size_t i = 1; i < order.size(); ++i) {
      const OpEvent& prev = trace.event(order[i - 1]);
      const OpEvent& cur = trace.event(order[i]);
      if (cur.start + kTimeSlack < prev.end) {
        fail(schedule.op(order[i]).label + " overlaps " +
             schedule.op(order[i - 1]).label + " on the " +
             std::string(stream_name(k)) + " stream");
      }
    }
  }

  for (const OpNode& op : ops) {
    const OpEvent& e = trace.event(op.id);
    for (OpId d : op.deps) {
      if (e.start + kTimeSlack < trace.event(d).end) {
        fail(op.label + " starts before dependency " + schedule.op(d).label +
             " ends");
      }
    }
    if (e.exec_start + kTimeSlack < e.start || e.end + kTimeSlack < e.exec_start) {
      fail(op.label + " has inconsistent phase times");
    }
    double integral = 0.0;
    for (const RateSegment& s : e.segments) {
      if (s.start + kTimeSlack < e.exec_start || s.end > e.end + kTimeSlack) {
        fail(op.label + " has a rate segment outside its execution");
      }
      integral += s.rate * (s.end - s.start);
    }
    if (std::abs(integral - op.work) > work_tolerance * op.work) {
      fail(op.label + " integrates to " + std::to_string(integral) +
           " instead of " + std::to_string(op.work));
    }
  }

  // Pool capacity: sweep acquire/release boundaries per pool.
  struct Edge {
    double time;
    int delta;
  };
  std::vector<std::vector<Edge>> edges(schedule.pools().size());
  std::array<double, 2> pass_start = {std::numeric_limits<double>::infinity(),
                                      std::numeric_limits<double>::infinity()};
  for (const OpNode& op : ops) {
    double& ps = pass_start[static_cast<int>(op.direction)];
    ps = std::min(ps, trace.event(op.id).start);
  }
  for (double& ps : pass_start) {
    if (!std::isfinite(ps)) ps = 0.0;
  }
  for (const PoolUse& u : schedule.uses()) {
    double acquire = pass_start[static_cast<int>(u.direction)];
    if (!u.producers.empty()) {
      acquire = std::numeric_limits<double>::infinity();
      for (OpId p : u.producers) {
        acquire = std::min(acquire, trace.event(p).start);
      }
    }
    double release = std::numeric_limits<double>::infinity();
    if (!u.consumers.empty()) {
      release = 0.0;
      for (OpId c : u.consumers) release = std::max(release, trace.event(c).end);
    }
    auto& list = edges[static_cast<size_t>(u.pool)];
    list.push_back({acquire, +1});
    list.push_back({release, -1});
  }
  for (size_t p = 0; p < edges.size(); ++p) {
    auto& list = edges[p];
    std::sort(list.begin(), list.end(), [](const Edge& a, const Edge& b) {
      if (a.time != b.time) return a.time < b.time;
      return a.delta < b.delta;  // releases first
    });
    int live = 0;
    for (const Edge& e : list) {
      live += e.delta;
      if (live > schedule.pools()[p].capacity) {
        fail("pool " + schedule.pools()[p].name + " holds " +
             std::to_string(live) + " slots, capacity " +
             std::to_string(schedule.pools()[p].capacity));
        break;
      }
    }
  }
  return v;
}

}  // namespace moesim
