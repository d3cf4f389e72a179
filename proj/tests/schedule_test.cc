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

#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "moesim/pipesim.h"
#include "test_support.h"

namespace moesim {
namespace {

using K = ReuseStrategy::Kind;

std::vector<std::string> labels(const Schedule& s, StreamKind k) {
  std::vector<std::string> out;
  for (OpId id : s.stream_order(k)) out.push_back(s.op(id).label);
  return out;
}

const OpNode& find(const Schedule& s, const std::string& label) {
  for (const OpNode& op : s.ops()) {
    if (op.label == label) return op;
  }
  throw std::runtime_error("no op " + label);
}

bool depends(const Schedule& s, const std::string& op, const std::string& on) {
  const auto& deps = find(s, op).deps;
  return std::find(deps.begin(), deps.end(), find(s, on).id) != deps.end();
}

using V = std::vector<std::string>;

TEST(Schedule, ForwardWithoutReuse) {
  const ModelSpec spec(4, 8, 2, 2);
  const Schedule s = build_schedule(spec, BatchSpec(12, 3), ReuseStrategy(),
                                    false, ScheduleScope::kForward);
  EXPECT_EQ(s.size(), 9u);
  EXPECT_EQ(labels(s, StreamKind::kCollective),
            (V{"S0", "S1", "R0", "S2", "R1", "R2"}));
  EXPECT_EQ(labels(s, StreamKind::kCompute), (V{"C0", "C1", "C2"}));
  EXPECT_TRUE(labels(s, StreamKind::kCopy).empty());
  EXPECT_TRUE(depends(s, "C1", "S1"));
  EXPECT_TRUE(depends(s, "R1", "C1"));
  EXPECT_TRUE(find(s, "S0").deps.empty());
  const OpNode& c = find(s, "C0");
  EXPECT_EQ(c.units, 2);
  EXPECT_EQ(c.work, 2.0 * 4 * 4 * 8);
  EXPECT_EQ(find(s, "S2").work, 4.0 * 4);
  for (const BufferPool& p : s.pools()) EXPECT_EQ(p.capacity, 3);
}

TEST(Schedule, ForwardOffloads) {
  const ModelSpec spec(4, 8, 2, 2);
  const Schedule s = build_schedule(spec, BatchSpec(8, 2), ReuseStrategy(K::kS1),
                                    true, ScheduleScope::kForward);
  EXPECT_EQ(labels(s, StreamKind::kCopy),
            (V{"D.DI0", "D.M0", "D.DI1", "D.M1"}));
  EXPECT_TRUE(depends(s, "D.DI0", "S0"));
  EXPECT_TRUE(depends(s, "D.M1", "C1"));
  EXPECT_EQ(find(s, "D.M0").units, kCopyUnitsMiddle);
  EXPECT_EQ(find(s, "D.M0").tensor, TensorRole::kMiddle);
  EXPECT_EQ(find(s, "D.DI1").units, kCopyUnitsDispatchedInput);
  // The single T_M slot: C1 overwrites it only after C0 and its offload.
  EXPECT_TRUE(depends(s, "C1", "D.M0"));
}

TEST(Schedule, BackwardOrders) {
  const ModelSpec spec(4, 8, 2, 2);
  const Schedule s4 = build_schedule(spec, BatchSpec(12, 3),
                                     ReuseStrategy(K::kS4), true,
                                     ScheduleScope::kBackward);
  EXPECT_EQ(labels(s4, StreamKind::kCollective),
            (V{"X0", "R'0", "X1", "R'1", "S'0", "X2", "R'2", "S'1", "S'2"}));
  EXPECT_EQ(labels(s4, StreamKind::kCompute),
            (V{"Rc0", "G2.0", "G1.0", "Rc1", "G2.1", "G1.1", "Rc2", "G2.2",
               "G1.2"}));
  EXPECT_TRUE(depends(s4, "Rc1", "X1"));
  EXPECT_TRUE(depends(s4, "G2.1", "Rc1"));
  EXPECT_TRUE(depends(s4, "G2.1", "R'1"));
  EXPECT_TRUE(depends(s4, "G1.1", "X1"));
  EXPECT_TRUE(depends(s4, "S'1", "G1.1"));

  const Schedule s1 = build_schedule(spec, BatchSpec(12, 3),
                                     ReuseStrategy(K::kS1), true,
                                     ScheduleScope::kBackward);
  EXPECT_EQ(labels(s1, StreamKind::kCopy),
            (V{"H.M0", "H.DI0", "H.M1", "H.DI1", "H.M2", "H.DI2"}));
  EXPECT_EQ(labels(s1, StreamKind::kCollective),
            (V{"R'0", "R'1", "S'0", "R'2", "S'1", "S'2"}));
  EXPECT_TRUE(depends(s1, "G2.0", "H.M0"));
  EXPECT_TRUE(depends(s1, "G1.0", "H.DI0"));

  const Schedule none = build_schedule(spec, BatchSpec(12, 3), ReuseStrategy(),
                                       false, ScheduleScope::kBackward);
  EXPECT_EQ(labels(none, StreamKind::kCompute),
            (V{"G2.0", "G1.0", "G2.1", "G1.1", "G2.2", "G1.2"}));
}

TEST(Schedule, StreamUnitsMatchWorkloadVectors) {
  testing::Gen gen(1);
  for (int i = 0; i < 200; ++i) {
    const ModelSpec spec = gen.model();
    const Count n = gen.integer(2, 9);
    const Count b = n * gen.integer(1, 64);
    const ReuseStrategy st = gen.strategy();
    for (Direction d : {Direction::kForward, Direction::kBackward}) {
      const Schedule s = build_schedule(spec, BatchSpec(b, n), st, st.reuses(), d);
      std::array<int, 3> units = {0, 0, 0};
      for (const OpNode& op : s.ops()) units[static_cast<int>(op.stream)] += op.units;
      const Workload q = d == Direction::kForward ? st.q_fw() : st.q_bw();
      for (int k = 0; k < 3; ++k) {
        EXPECT_EQ(units[k], n * q[k]) << st.name() << " stream " << k;
      }
    }
  }
}

TEST(Schedule, ReusePoolsAndSlots) {
  const ModelSpec spec(4, 8, 2, 2);
  const Schedule s = build_schedule(spec, BatchSpec(40, 5), ReuseStrategy(K::kS3),
                                    true, ScheduleScope::kStep);
  std::map<std::string, int> caps;
  for (const BufferPool& p : s.pools()) caps[p.name] = p.capacity;
  EXPECT_EQ(caps["T_I"], 5);
  EXPECT_EQ(caps["T_DI"], 2);
  EXPECT_EQ(caps["T_M"], 1);
  EXPECT_EQ(caps["T_DO"], 2);
  EXPECT_EQ(caps["T_O"], 5);
  EXPECT_EQ(caps["dT_DI"], 2);
  EXPECT_EQ(caps["dT_M"], 1);
  EXPECT_EQ(caps["dT_DO"], 2);
  for (const PoolUse& u : s.uses()) {
    const BufferPool& p = s.pools()[static_cast<size_t>(u.pool)];
    EXPECT_LT(u.slot, p.capacity);
    EXPECT_GE(u.slot, 0);
    if (p.capacity == 5) EXPECT_EQ(u.slot, u.partition);
  }
  // Third use of a two-slot pool waits for the first use's consumers.
  EXPECT_TRUE(depends(s, "S2", "C0"));
  EXPECT_TRUE(depends(s, "S2", "D.DI0"));
}

TEST(Schedule, StepBackwardWaitsForForward) {
  const ModelSpec spec(4, 8, 2, 2);
  const Schedule s = build_schedule(spec, BatchSpec(8, 2), ReuseStrategy(),
                                    false, ScheduleScope::kStep);
  EXPECT_EQ(s.size(), 14u);
  for (const std::string fw : {"S0", "C0", "R0", "S1", "C1", "R1"}) {
    EXPECT_TRUE(depends(s, "R'0", fw)) << fw;
  }
  // Backward ops are appended after the forward ones on each stream.
  EXPECT_EQ(labels(s, StreamKind::kCompute),
            (V{"C0", "C1", "G2.0", "G1.0", "G2.1", "G1.1"}));
}

TEST(Schedule, BackwardScopePreloadsForwardTensors) {
  const ModelSpec spec(4, 8, 2, 2);
  const Schedule s = build_schedule(spec, BatchSpec(9, 3), ReuseStrategy(K::kS2),
                                    true, ScheduleScope::kBackward);
  std::map<std::string, std::vector<Count>> preloaded;
  for (const BufferPool& p : s.pools()) preloaded[p.name] = p.preloaded_slots;
  EXPECT_EQ(preloaded["T_O"], (std::vector<Count>{3, 3, 3}));
  EXPECT_EQ(preloaded["T_DO"].size(), 2u);
  EXPECT_EQ(preloaded["T_M"].size(), 1u);
}

TEST(Schedule, Errors) {
  const ModelSpec spec(4, 8, 2, 2);
  auto code = [&](ReuseStrategy st, bool reuse, Count n) {
    try {
      build_schedule(spec, BatchSpec(8, n), st, reuse, ScheduleScope::kStep);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;  // sentinel: no error
  };
  EXPECT_EQ(code(ReuseStrategy(K::kS1), true, 1), ErrorCode::kReuseNotApplicable);
  EXPECT_EQ(code(ReuseStrategy(K::kS1), false, 2), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code(ReuseStrategy(), true, 2), ErrorCode::kInvalidArgument);
  EXPECT_EQ(code(ReuseStrategy(), false, 1), ErrorCode::kIo);
  EXPECT_THROW(BatchSpec(4, 5), Error);
}

TEST(Schedule, UnevenPartitions) {
  const ModelSpec spec(4, 8, 2, 2);
  const Schedule s = build_schedule(spec, BatchSpec(10, 4), ReuseStrategy(),
                                    false, ScheduleScope::kForward);
  EXPECT_EQ(find(s, "S0").tokens, 3);
  EXPECT_EQ(find(s, "S3").tokens, 2);
  EXPECT_EQ(find(s, "C3").work, 2.0 * 2 * 4 * 8);
}

TEST(Schedule, RandomSchedulesAreAcyclic) {
  testing::Gen gen(99);
  for (int i = 0; i < 500; ++i) {
    const ModelSpec spec = gen.model();
    const Count n = gen.integer(1, 16);
    const Count b = gen.integer(n, 4096);
    ReuseStrategy st = gen.strategy();
    if (n < 2) st = ReuseStrategy();
    const auto scope = static_cast<ScheduleScope>(gen.integer(0, 2));
    const Schedule s = build_schedule(spec, BatchSpec(b, n), st, st.reuses(), scope);
    EXPECT_NO_THROW(check_acyclic(s));
    size_t ordered = 0;
    for (StreamKind k : kAllStreams) {
      for (OpId id : s.stream_order(k)) EXPECT_EQ(s.op(id).stream, k);
      ordered += s.stream_order(k).size();
    }
    EXPECT_EQ(ordered, s.size());
    for (const OpNode& op : s.ops()) {
      for (OpId d : op.deps) EXPECT_NE(d, op.id);
      EXPECT_GT(op.work, 0.0);
    }
  }
}

TEST(Schedule, EmptySchedule) {
  const Schedule s = make_empty_schedule(ModelSpec(1, 1, 1, 1), BatchSpec(1, 1));
  EXPECT_EQ(s.size(), 0u);
  EXPECT_EQ(simulate(s, HardwareProfile()).makespan(), 0.0);
}

}  // namespace
}  // namespace moesim
