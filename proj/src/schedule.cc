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
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "moesim/pipesim.h"

namespace moesim {

std::string_view op_kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::kDispatch: return "dispatch";
    case OpKind::kExpertCompute: return "expert_compute";
    case OpKind::kCombine: return "combine";
    case OpKind::kOffloadCopy: return "offload_copy";
    case OpKind::kPrefetchCopy: return "prefetch_copy";
    case OpKind::kRecompute: return "recompute";
    case OpKind::kRecommunicate: return "recommunicate";
    case OpKind::kGradCompute: return "grad_compute";
  }
  return "?";
}

std::string_view scope_name(ScheduleScope scope) {
  switch (scope) {
    case ScheduleScope::kForward: return "forward";
    case ScheduleScope::kBackward: return "backward";
    case ScheduleScope::kStep: return "step";
  }
  return "?";
}

class ScheduleBuilder {
 public:
  ScheduleBuilder(const ModelSpec& spec, const BatchSpec& batch,
                  ReuseStrategy strategy, bool reuse, ScheduleScope scope)
      : s_(spec, batch, strategy, reuse, scope),
        n_(static_cast<int>(batch.partitions())) {}

  Schedule build() {
    const ScheduleScope scope = s_.scope();
    if (scope != ScheduleScope::kBackward) build_forward();
    if (scope != ScheduleScope::kForward) build_backward();
    finalize();
    return std::move(s_);
  }

 private:
  struct Pools {
    PoolId input = -1, dispatched_input = -1, middle = -1,
           dispatched_output = -1, output = -1;
  };

  bool reuse() const { return s_.reuse_enabled(); }
  Count tokens(int i) const { return s_.batch().partition_tokens(i); }

  OpId add(OpKind kind, StreamKind stream, Direction dir, int partition,
           int units, std::vector<OpId> deps, std::string label,
           TensorRole tensor = TensorRole::kInput) {
    OpNode op;
    op.id = static_cast<OpId>(s_.ops_.size());
    op.partition = partition;
    op.kind = kind;
    op.stream = stream;
    op.direction = dir;
    op.units = units;
    op.tokens = tokens(partition);
    const double t = static_cast<double>(op.tokens);
    const double m = static_cast<double>(s_.spec().model_dim());
    const double h = static_cast<double>(s_.spec().hidden_dim());
    op.work = units * (stream == StreamKind::kCompute ? t * h * m : t * m);
    op.deps = std::move(deps);
    op.tensor = tensor;
    op.label = std::move(label) + std::to_string(partition);
    s_.ops_.push_back(std::move(op));
    return s_.ops_.back().id;
  }

  PoolId add_pool(TensorRole role, bool gradient, int capacity,
                  SlotLifetime lifetime) {
    BufferPool p;
    p.id = static_cast<PoolId>(s_.pools_.size());
    p.role = role;
    p.gradient = gradient;
    p.category =
        gradient ? MemoryCategory::kBuffer : MemoryCategory::kActivation;
    p.capacity = std::min(capacity, n_);
    p.width = role_width(s_.spec(), role);
    p.lifetime = lifetime;
    p.preload_direction = gradient ? Direction::kBackward : Direction::kForward;
    p.name = (gradient ? "d" : "") + std::string(role_name(role));
    s_.pools_.push_back(std::move(p));
    return s_.pools_.back().id;
  }

  // Reused pools cycle through capacity slots in use order; the others give
  // each partition its own slot.
  bool cycles(PoolId pool) const {
    return s_.pools_[static_cast<size_t>(pool)].capacity < n_ ||
           reused_.count(pool) > 0;
  }

  size_t use(PoolId pool, int partition, Direction dir,
             std::vector<OpId> producers, std::vector<OpId> consumers) {
    PoolUse u;
    u.pool = pool;
    u.partition = partition;
    u.tokens = tokens(partition);
    u.direction = dir;
    u.producers = std::move(producers);
    u.consumers = std::move(consumers);
    const int seq = use_count_[pool]++;
    const int cap = s_.pools_[static_cast<size_t>(pool)].capacity;
    u.slot = cycles(pool) ? seq % cap : partition;
    s_.uses_.push_back(std::move(u));
    return s_.uses_.size() - 1;
  }

  void preload(PoolId pool, int slots) {
    BufferPool& p = s_.pools_[static_cast<size_t>(pool)];
    p.preload_direction = Direction::kBackward;
    for (int i = 0; i < slots; ++i) p.preloaded_slots.push_back(tokens(i));
  }

  void build_forward() {
    const ReuseStrategy st = s_.strategy();
    const bool r = reuse();
    act_.input = add_pool(TensorRole::kInput, false, n_, SlotLifetime::kStep);
    act_.dispatched_input = add_pool(TensorRole::kDispatchedInput, false,
                                     r ? 2 : n_, SlotLifetime::kStep);
    act_.middle =
        add_pool(TensorRole::kMiddle, false, r ? 1 : n_, SlotLifetime::kStep);
    act_.dispatched_output = add_pool(TensorRole::kDispatchedOutput, false,
                                      r ? 2 : n_, SlotLifetime::kStep);
    act_.output = add_pool(TensorRole::kOutput, false, n_, SlotLifetime::kStep);
    if (r) {
      reused_.insert(act_.dispatched_input);
      reused_.insert(act_.middle);
      reused_.insert(act_.dispatched_output);
    }

    std::vector<OpId> dispatch(n_), combine(n_);
    for (int i = 0; i < n_; ++i) {
      const OpId s = add(OpKind::kDispatch, StreamKind::kCollective,
                         Direction::kForward, i, 1, {}, "S");
      const OpId c = add(OpKind::kExpertCompute, StreamKind::kCompute,
                         Direction::kForward, i, 2, {s}, "C");
      const OpId rr = add(OpKind::kCombine, StreamKind::kCollective,
                          Direction::kForward, i, 1, {c}, "R");
      dispatch[i] = s;
      combine[i] = rr;
      s_.orders_[static_cast<int>(StreamKind::kCompute)].push_back(c);

      std::vector<OpId> di_consumers = {c};
      std::vector<OpId> m_consumers = {c};
      if (r && st.restore_dispatched_input() == RestoreDI::kOffload) {
        const OpId d = add(OpKind::kOffloadCopy, StreamKind::kCopy,
                           Direction::kForward, i, kCopyUnitsDispatchedInput,
                           {s}, "D.DI", TensorRole::kDispatchedInput);
        di_consumers.push_back(d);
        s_.orders_[static_cast<int>(StreamKind::kCopy)].push_back(d);
      }
      if (r && st.restore_middle() == RestoreM::kOffload) {
        const OpId d = add(OpKind::kOffloadCopy, StreamKind::kCopy,
                           Direction::kForward, i, kCopyUnitsMiddle, {c},
                           "D.M", TensorRole::kMiddle);
        m_consumers.push_back(d);
        s_.orders_[static_cast<int>(StreamKind::kCopy)].push_back(d);
      }
      fw_input_use_.push_back(
          use(act_.input, i, Direction::kForward, {}, {s}));
      fw_di_use_.push_back(use(act_.dispatched_input, i, Direction::kForward,
                               {s}, di_consumers));
      fw_m_use_.push_back(
          use(act_.middle, i, Direction::kForward, {c}, m_consumers));
      use(act_.dispatched_output, i, Direction::kForward, {c}, {rr});
      use(act_.output, i, Direction::kForward, {rr}, {});
    }
    // S and R alternate on the collective stream once an R can be issued.
    auto& coll = s_.orders_[static_cast<int>(StreamKind::kCollective)];
    coll.push_back(dispatch[0]);
    for (int i = 1; i < n_; ++i) {
      coll.push_back(dispatch[i]);
      coll.push_back(combine[i - 1]);
    }
    coll.push_back(combine[n_ - 1]);
    forward_ops_ = static_cast<OpId>(s_.ops_.size());
  }

  void build_backward() {
    const ReuseStrategy st = s_.strategy();
    const bool r = reuse();
    const bool step = s_.scope() == ScheduleScope::kStep;
    const SlotLifetime grad_life =
        n_ == 1 ? SlotLifetime::kTransient : SlotLifetime::kStep;

    if (!step) {
      // Forward tensors already exist when a backward-only pass starts.
      act_.input =
          add_pool(TensorRole::kInput, false, n_, SlotLifetime::kStep);
      act_.dispatched_input = add_pool(TensorRole::kDispatchedInput, false,
                                       r ? 2 : n_, SlotLifetime::kStep);
      act_.middle = add_pool(TensorRole::kMiddle, false, r ? 1 : n_,
                             SlotLifetime::kStep);
      act_.dispatched_output = add_pool(TensorRole::kDispatchedOutput, false,
                                        r ? 2 : n_, SlotLifetime::kStep);
      act_.output =
          add_pool(TensorRole::kOutput, false, n_, SlotLifetime::kStep);
      if (r) {
        reused_.insert(act_.dispatched_input);
        reused_.insert(act_.middle);
        reused_.insert(act_.dispatched_output);
        preload(act_.dispatched_input, std::min(2, n_));
        preload(act_.middle, 1);
        preload(act_.dispatched_output, std::min(2, n_));
      } else {
        preload(act_.dispatched_output, n_);
      }
      preload(act_.output, n_);
      // T_I is live (and read by re-communication); unreused T_DI and T_M
      // are live until their gradient computation consumes them.
      for (int i = 0; i < n_; ++i) {
        fw_input_use_.push_back(
            use(act_.input, i, Direction::kBackward, {}, {}));
        if (!r) {
          fw_di_use_.push_back(
              use(act_.dispatched_input, i, Direction::kBackward, {}, {}));
          fw_m_use_.push_back(
              use(act_.middle, i, Direction::kBackward, {}, {}));
        }
      }
    }

    const PoolId g_out =
        add_pool(TensorRole::kOutput, true, n_, grad_life);
    const PoolId g_do = add_pool(TensorRole::kDispatchedOutput, true,
                                 r ? 2 : n_, grad_life);
    const PoolId g_m =
        add_pool(TensorRole::kMiddle, true, r ? 1 : n_, grad_life);
    const PoolId g_di = add_pool(TensorRole::kDispatchedInput, true,
                                 r ? 2 : n_, grad_life);
    const PoolId g_in = add_pool(TensorRole::kInput, true, n_, grad_life);
    if (r) {
      reused_.insert(g_do);
      reused_.insert(g_m);
      reused_.insert(g_di);
    }

    std::vector<std::vector<OpId>> first(n_);
    std::vector<OpId> second(n_);
    auto& compute = s_.orders_[static_cast<int>(StreamKind::kCompute)];
    auto& copy = s_.orders_[static_cast<int>(StreamKind::kCopy)];
    for (int i = 0; i < n_; ++i) {
      std::optional<OpId> di_src, m_src;
      std::optional<OpId> prefetch_di, prefetch_m, recomm, recompute;
      if (r) {
        switch (st.restore_dispatched_input()) {
          case RestoreDI::kOffload:
            prefetch_di = add(OpKind::kPrefetchCopy, StreamKind::kCopy,
                              Direction::kBackward, i,
                              kCopyUnitsDispatchedInput, {}, "H.DI",
                              TensorRole::kDispatchedInput);
            di_src = prefetch_di;
            break;
          case RestoreDI::kCommunicate:
            recomm = add(OpKind::kRecommunicate, StreamKind::kCollective,
                         Direction::kBackward, i, 1, {}, "X");
            di_src = recomm;
            break;
          case RestoreDI::kKept: break;
        }
        switch (st.restore_middle()) {
          case RestoreM::kOffload:
            prefetch_m = add(OpKind::kPrefetchCopy, StreamKind::kCopy,
                             Direction::kBackward, i, kCopyUnitsMiddle, {},
                             "H.M", TensorRole::kMiddle);
            m_src = prefetch_m;
            break;
          case RestoreM::kRecompute:
            recompute = add(OpKind::kRecompute, StreamKind::kCompute,
                            Direction::kBackward, i, 1, {*di_src}, "Rc");
            m_src = recompute;
            break;
          case RestoreM::kKept: break;
        }
      }
      const OpId rb = add(OpKind::kCombine, StreamKind::kCollective,
                          Direction::kBackward, i, 1, {}, "R'");
      std::vector<OpId> g2_deps = {rb};
      if (m_src) g2_deps.push_back(*m_src);
      const OpId g2 = add(OpKind::kGradCompute, StreamKind::kCompute,
                          Direction::kBackward, i, 2, g2_deps, "G2.");
      std::vector<OpId> g1_deps = {g2};
      if (di_src) g1_deps.push_back(*di_src);
      const OpId g1 = add(OpKind::kGradCompute, StreamKind::kCompute,
                          Direction::kBackward, i, 2, g1_deps, "G1.");
      const OpId sb = add(OpKind::kDispatch, StreamKind::kCollective,
                          Direction::kBackward, i, 1, {g1}, "S'");

      if (recomm) first[i].push_back(*recomm);
      first[i].push_back(rb);
      second[i] = sb;
      if (recompute) compute.push_back(*recompute);
      compute.push_back(g2);
      compute.push_back(g1);
      if (prefetch_m) copy.push_back(*prefetch_m);
      if (prefetch_di) copy.push_back(*prefetch_di);

      use(g_out, i, Direction::kBackward, {}, {rb});
      use(g_do, i, Direction::kBackward, {rb}, {g2});
      use(g_m, i, Direction::kBackward, {g2}, {g1});
      use(g_di, i, Direction::kBackward, {g1}, {sb});
      use(g_in, i, Direction::kBackward, {sb}, {});

      if (recomm) {
        s_.uses_[fw_input_use_[i]].consumers.push_back(*recomm);
      }
      if (r) {
        std::vector<OpId> di_consumers;
        if (recompute) di_consumers.push_back(*recompute);
        di_consumers.push_back(g1);
        use(act_.dispatched_input, i, Direction::kBackward, {*di_src},
            di_consumers);
        use(act_.middle, i, Direction::kBackward, {*m_src}, {g2});
      } else {
        s_.uses_[fw_di_use_[i]].consumers.push_back(g1);
        s_.uses_[fw_m_use_[i]].consumers.push_back(g2);
      }
    }
    auto& coll = s_.orders_[static_cast<int>(StreamKind::kCollective)];
    auto append = [&](const std::vector<OpId>& ops) {
      coll.insert(coll.end(), ops.begin(), ops.end());
    };
    append(first[0]);
    for (int i = 1; i < n_; ++i) {
      append(first[i]);
      coll.push_back(second[i - 1]);
    }
    coll.push_back(second[n_ - 1]);

    if (step) {
      // Backward starts once the forward pass has fully drained.
      for (OpId id = forward_ops_; id < static_cast<OpId>(s_.ops_.size());
           ++id) {
        OpNode& op = s_.ops_[static_cast<size_t>(id)];
        if (!op.deps.empty()) continue;
        for (OpId f = 0; f < forward_ops_; ++f) op.deps.push_back(f);
      }
    }
  }

  void finalize() {
    // Slot edges: the k-th use of a cycled pool waits for every consumer of
    // use k - capacity.
    std::vector<std::vector<size_t>> per_pool(s_.pools_.size());
    for (size_t u = 0; u < s_.uses_.size(); ++u) {
      per_pool[static_cast<size_t>(s_.uses_[u].pool)].push_back(u);
    }
    for (size_t p = 0; p < per_pool.size(); ++p) {
      if (!cycles(static_cast<PoolId>(p))) continue;
      const size_t cap = static_cast<size_t>(s_.pools_[p].capacity);
      const auto& seq = per_pool[p];
      for (size_t k = cap; k < seq.size(); ++k) {
        const PoolUse& prev = s_.uses_[seq[k - cap]];
        const PoolUse& cur = s_.uses_[seq[k]];
        for (OpId producer : cur.producers) {
          auto& deps = s_.ops_[static_cast<size_t>(producer)].deps;
          for (OpId c : prev.consumers) {
            if (c != producer) deps.push_back(c);
          }
        }
      }
    }
    for (OpNode& op : s_.ops_) {
      std::sort(op.deps.begin(), op.deps.end());
      op.deps.erase(std::unique(op.deps.begin(), op.deps.end()),
                    op.deps.end());
    }
    check_acyclic(s_);
  }

  Schedule s_;
  int n_;
  Pools act_;
  std::set<PoolId> reused_;
  std::map<PoolId, int> use_count_;
  std::vector<size_t> fw_input_use_, fw_di_use_, fw_m_use_;
  OpId forward_ops_ = 0;
};

Schedule build_schedule(const ModelSpec& spec, const BatchSpec& batch,
                        ReuseStrategy strategy, bool reuse_enabled,
                        ScheduleScope scope) {
  if (reuse_enabled && batch.partitions() < 2) {
    throw Error(ErrorCode::kReuseNotApplicable,
                "memory reuse needs at least 2 partitions");
  }
  if (reuse_enabled != strategy.reuses()) {
    throw Error(ErrorCode::kInvalidArgument,
                reuse_enabled
                    ? "memory reuse needs a restore strategy (S1-S4)"
                    : "strategy " + std::string(strategy.name()) +
                          " requires memory reuse to be enabled");
  }
  return ScheduleBuilder(spec, batch, strategy, reuse_enabled, scope).build();
}

Schedule build_schedule(const ModelSpec& spec, const BatchSpec& batch,
                        ReuseStrategy strategy, bool reuse_enabled,
                        Direction direction) {
  return build_schedule(spec, batch, strategy, reuse_enabled,
                        direction == Direction::kForward
                            ? ScheduleScope::kForward
                            : ScheduleScope::kBackward);
}

Schedule make_empty_schedule(const ModelSpec& spec, const BatchSpec& batch) {
  return Schedule(spec, batch, ReuseStrategy(), false, ScheduleScope::kForward);
}

void check_acyclic(const Schedule& schedule) {
  const size_t n = schedule.size();
  std::vector<std::vector<OpId>> out(n);
  std::vector<int> indegree(n, 0);
  for (const OpNode& op : schedule.ops()) {
    for (OpId d : op.deps) {
      out[static_cast<size_t>(d)].push_back(op.id);
      ++indegree[static_cast<size_t>(op.id)];
    }
  }
  for (const auto& order : schedule.stream_orders()) {
    for (size_t i = 1; i < order.size(); ++i) {
      out[static_cast<size_t>(order[i - 1])].push_back(order[i]);
      ++indegree[static_cast<size_t>(order[i])];
    }
  }
  std::deque<OpId> ready;
  for (size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push_back(static_cast<OpId>(i));
  }
  size_t visited = 0;
  while (!ready.empty()) {
    const OpId id = ready.front();
    ready.pop_front();
    ++visited;
    for (OpId next : out[static_cast<size_t>(id)]) {
      if (--indegree[static_cast<size_t>(next)] == 0) ready.push_back(next);
    }
  }
  if (visited != n) {
    std::ostringstream msg;
    msg << "schedule deadlocks: buffer/stream cycle through";
    int shown = 0;
    for (size_t i = 0; i < n && shown < 8; ++i) {
      if (indegree[i] > 0) {
        msg << ' ' << schedule.ops()[i].label;
        ++shown;
      }
    }
    throw Error(ErrorCode::kScheduleConstruction, msg.str());
  }
}

}  // namespace moesim
