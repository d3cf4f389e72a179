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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "moesim/autotune.h"
#include "moesim/cli.h"
#include "moesim/costmodel.h"
#include "moesim/memmodel.h"
#include "moesim/pipesim.h"
#include "test_support.h"

namespace moesim {
namespace {

using K = ReuseStrategy::Kind;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// 1. Simulated step peaks equal the closed forms exactly.
Outcome memory_exactness() {
  int cases = 0, bad = 0;
  for (const std::string& name : model_preset_names()) {
    const ModelSpec spec = model_preset(name);
    for (Count n : {2, 4, 8}) {
      for (Count b : {4096, 8192, 16384, 32768}) {
        const MemoryReport want = reuse_report(spec, b, n);
        for (K kind : {K::kS1, K::kS2, K::kS3, K::kS4}) {
          const Schedule s = build_schedule(spec, BatchSpec(b, n),
                                            ReuseStrategy(kind), true,
                                            ScheduleScope::kStep);
          const MemoryProfile p = measure_memory(s, simulate(s, HardwareProfile()));
          ++cases;
          if (p.peak_activations != want.activations ||
              p.peak_buffers != want.buffers ||
              p.peak_combined != want.activations + want.buffers) {
            ++bad;
          }
        }
      }
    }
  }
  return {bad == 0, std::to_string(cases) + " cases, " + std::to_string(bad) +
                        " mismatches (tolerance 0 elements)"};
}

// 2. Saving ratio through the CLI.
Outcome saving_ratio() {
  std::ostringstream out, err;
  const int status = run_subcommand({"memory", "--preset", "moe-gpt3-s",
                                     "--batch", "16384", "--n", "8", "--reuse"},
                                    out, err);
  if (status != 0) return {false, "memory exited " + std::to_string(status)};
  const nlohmann::json doc = nlohmann::json::parse(out.str());
  const double phi = doc["saving_ratio"];
  const double sim = doc["simulated"]["saving_ratio"];
  const double rel = std::abs(sim - phi) / phi;
  return {std::abs(phi - 0.5709) <= 1e-4 && rel <= 0.05,
          fmt("phi = %.6f (want 0.5709 +- 0.0001), simulated = %.6f, "
              "relative gap %.2e (limit 0.05)",
              phi, sim, rel)};
}

// 3. Bottleneck stream busy time equals n * c_total.
Outcome cost_agreement() {
  double worst = 0.0;
  int cases = 0;
  for (double a : {10.0, 100.0, 1000.0}) {
    for (double b : {5.0, 50.0}) {
      const HardwareProfile hw = testing::quiet_profile(a, b);
      for (const std::string& name : model_preset_names()) {
        const ModelSpec spec = model_preset(name);
        for (Count n : {2, 4, 8}) {
          const Count tokens = 16384;
          for (K kind : {K::kNoReuse, K::kS1, K::kS2, K::kS3, K::kS4}) {
            const ReuseStrategy st(kind);
            for (Direction d : {Direction::kForward, Direction::kBackward}) {
              const Schedule s = build_schedule(spec, BatchSpec(tokens, n), st,
                                                st.reuses(), d);
              const Trace t = simulate(s, hw);
              double busy = 0.0;
              for (StreamKind k : kAllStreams) {
                busy = std::max(busy, t.busy_time(k));
              }
              const double want =
                  static_cast<double>(n) *
                  stage_cost(spec, hw, tokens / n, st, d).c_total;
              worst = std::max(worst, std::abs(busy - want) / want);
              ++cases;
            }
          }
        }
      }
    }
  }
  return {worst <= 0.01, std::to_string(cases) + " cases, worst relative " +
                             fmt("error %.2e (limit 0.01)", worst)};
}

// 4. The cheapest strategy flips between S1/S2 and S4.
Outcome crossover() {
  const ModelSpec spec = model_preset("moe-gpt3-xl");
  const Count b = 4096;
  // Per-partition volumes: compute b H M, collective and copy b M.
  const double v_comp = static_cast<double>(b) * 8192 * 2048;
  const double v_io = static_cast<double>(b) * 2048;
  // Cheap links: per unit, collective and copy cost a tenth of compute, so
  // every strategy is compute bound and S1/S2 (4 backward units) beat
  // S3/S4 (5 units).
  HardwareProfile cheap = testing::quiet_profile(1, 1, 1e14);
  cheap.w_comm = 10 * 1e14 * v_io / v_comp;
  cheap.w_mem = cheap.w_comm;
  // Expensive links: collective time per unit equals compute, copy is 20x
  // compute. Copy-heavy strategies lose and S4 (no copy) wins.
  HardwareProfile dear = testing::quiet_profile(1, 1, 1e14);
  dear.w_comm = 1e14 * v_io / v_comp;
  dear.w_mem = dear.w_comm / 20;
  // Hand evaluation of forward + backward maxima in units of one compute op:
  //   cheap: S1 2+4, S2 2+4, S3 2+5, S4 2+5
  //   dear:  S1 100+100, S2 80+80, S3 20+20, S4 2+5
  const StrategySelection lo = select_strategy(spec, cheap, b);
  const StrategySelection hi = select_strategy(spec, dear, b);
  const double unit = v_comp / 1e14;
  const double expect_lo[4] = {6, 6, 7, 7};
  const double expect_hi[4] = {200, 160, 40, 7};
  bool totals = true;
  for (int i = 0; i < 4; ++i) {
    totals &= std::abs(lo.candidates[i].total / unit - expect_lo[i]) < 1e-9;
    totals &= std::abs(hi.candidates[i].total / unit - expect_hi[i]) < 1e-9;
  }
  const bool lo_ok = lo.chosen.kind() == K::kS1 || lo.chosen.kind() == K::kS2;
  const bool hi_ok = hi.chosen.kind() == K::kS4;
  return {lo_ok && hi_ok && totals,
          "cheap links -> " + std::string(lo.chosen.name()) +
              ", expensive links -> " + std::string(hi.chosen.name()) +
              (totals ? ", totals match hand evaluation"
                      : ", totals differ from hand evaluation")};
}

// 5. Adaptive granularity against exhaustive search.
Outcome adaptive_equivalence() {
  const ModelSpec spec = model_preset("moe-gpt3-xl");
  const HardwareProfile hw = testing::comm_bound_profile();
  const TrialBudget budget;  // noiseless simulator, candidates {1,2,4,8,16}
  WorkloadSpec w;
  w.seed = 2026;
  w.iterations = 1000;
  const std::vector<Count> seq = generate_workload(w);

  std::map<Count, Count> truth;
  auto exhaustive = [&](Count b) {
    auto it = truth.find(b);
    if (it != truth.end()) return it->second;
    Count best = 0;
    double best_t = std::numeric_limits<double>::infinity();
    for (Count n : budget.candidates) {
      if (n > b) continue;
      const double t =
          simulate_step_makespan(TrialRequest{&spec, &hw, ReuseStrategy(), b, n});
      if (t < best_t) {
        best_t = t;
        best = n;
      }
    }
    return truth[b] = best;
  };

  AdaptiveGranularity ctx(spec, hw, ReuseStrategy(), budget);
  const size_t warmup = seq.size() / 10;
  int wrong = 0, cache_trials = 0;
  std::uint64_t searches_at_warmup = 0;
  for (size_t i = 0; i < seq.size(); ++i) {
    if (i == warmup) searches_at_warmup = ctx.searches();
    const GranularityDecision d = ctx.decide(seq[i]);
    if (d.partitions != exhaustive(seq[i])) ++wrong;
    if (d.cache_hit && d.trials != 0) ++cache_trials;
  }
  const std::uint64_t late = ctx.searches() - searches_at_warmup;
  const std::uint64_t limit = 3 * budget.candidates.size();
  return {wrong == 0 && late <= limit && cache_trials == 0,
          std::to_string(wrong) + " mismatches of 1000, " +
              std::to_string(late) + " searches after warm-up (limit " +
              std::to_string(limit) + "), " + std::to_string(ctx.searches()) +
              " total, " + std::to_string(cache_trials) +
              " cache hits with trials"};
}

// 6. Pipelining speeds up comm-bound steps; large launch cost gives an
// interior optimum.
Outcome pipeline_speedup() {
  const ModelSpec spec = model_preset("moe-gpt3-xl");
  const HardwareProfile hw = testing::comm_bound_profile();
  const double mu = hw.slowdown.mu_comp();
  const double sigma = hw.slowdown.sigma_comm();
  auto step = [&](const HardwareProfile& p, Count b, Count n) {
    return simulate_step_makespan(TrialRequest{&spec, &p, ReuseStrategy(), b, n});
  };
  int slower = 0;
  double worst_speedup = std::numeric_limits<double>::infinity();
  for (Count b = 4096; b <= 65536; b += 1024) {
    const double ratio = step(hw, b, 1) / step(hw, b, 4);
    worst_speedup = std::min(worst_speedup, ratio);
    if (!(ratio > 1.0)) ++slower;
  }
  HardwareProfile slow_launch = hw;
  slow_launch.set_launch_overhead(1e-3);
  const Count b = 32768;
  std::vector<double> t;
  for (Count n = 1; n <= 16; ++n) t.push_back(step(slow_launch, b, n));
  const size_t best =
      static_cast<size_t>(std::min_element(t.begin(), t.end()) - t.begin());
  const bool interior = best > 0 && best + 1 < t.size() &&
                        t[best] < t.front() && t[best] < t.back();
  return {mu > 0.5 && sigma > 0.5 && slower == 0 && interior,
          fmt("mu_comm %.2f, sigma_comp %.2f, ", mu, sigma) +
              fmt("min speedup n=4 over n=1 for B in [4096, 65536]: %.3f; ",
                  worst_speedup) +
              "eps=1ms, B=32768: best n = " + std::to_string(best + 1) +
              " of 1..16"};
}

// 7. Random schedules produce valid traces.
Outcome validity_suite() {
  testing::Gen gen(7);
  int bad = 0;
  std::string first;
  for (int i = 0; i < 10000; ++i) {
    const ModelSpec spec = gen.model();
    const HardwareProfile hw = gen.profile();
    const Count n = gen.integer(1, 12);
    const Count b = gen.coin() ? n * gen.integer(1, 2000) : gen.integer(n, 20000);
    const ReuseStrategy st = n < 2 ? ReuseStrategy() : gen.strategy();
    const auto scope = static_cast<ScheduleScope>(gen.integer(0, 2));
    const Schedule s =
        build_schedule(spec, BatchSpec(b, n), st, st.reuses(), scope);
    const Validity v = check_trace(s, simulate(s, hw), 1e-9);
    if (!v.ok()) {
      if (first.empty()) first = v.violations.front();
      ++bad;
    }
  }
  return {bad == 0, "10000 configs, " + std::to_string(bad) + " invalid" +
                        (first.empty() ? "" : " (" + first + ")")};
}

// Smallest slowdown multiplier in the table. At 0.5 or above, running two
// streams together is never slower than running them back to back.
double weakest_overlap(const HardwareProfile& hw) {
  double low = 1.0;
  for (StreamKind k : kAllStreams) {
    for (unsigned bits = 0; bits < 8; ++bits) {
      low = std::min(low, hw.slowdown.factor(k, KindSet::from_bits(bits)));
    }
  }
  return low;
}

// 8. Exhaustive issue-order search bounds the simulator, and matches it on
// no-reuse schedules with equal micro-batches where overlap never loses.
Outcome oracle_equivalence() {
  std::vector<HardwareProfile> profiles = {
      HardwareProfile(), testing::quiet_profile(10, 5),
      testing::quiet_profile(1000, 50), testing::comm_bound_profile()};
  testing::Gen gen(8);
  for (int i = 0; i < 8; ++i) profiles.push_back(gen.profile());
  for (int i = 0; i < 16; ++i) {
    HardwareProfile hw = gen.profile();
    for (StreamKind k : kAllStreams) {
      for (unsigned bits = 1; bits < 8; ++bits) {
        const KindSet others = KindSet::from_bits(bits).without(k);
        if (!others.empty()) hw.slowdown.set(k, others, gen.real(0.5, 1.0));
      }
    }
    profiles.push_back(hw);
  }

  int pairs = 0, below = 0, symmetric = 0, unequal = 0;
  double worst_gap = 0.0;
  for (const std::string& name : model_preset_names()) {
    const ModelSpec spec = model_preset(name);
    for (Count n : {1, 2}) {
      for (K kind : {K::kNoReuse, K::kS1, K::kS2, K::kS3, K::kS4}) {
        const ReuseStrategy st(kind);
        if (st.reuses() && n < 2) continue;
        for (auto scope : {ScheduleScope::kForward, ScheduleScope::kBackward,
                           ScheduleScope::kStep}) {
          const Schedule s = build_schedule(spec, BatchSpec(4096, n), st,
                                            st.reuses(), scope);
          if (s.size() > kOracleMaxOps) continue;
          for (const HardwareProfile& hw : profiles) {
            ++pairs;
            const double sim = simulate(s, hw).makespan();
            const double best = brute_force_makespan(s, hw);
            if (sim < best * (1 - 1e-12)) ++below;
            if (!st.reuses() && weakest_overlap(hw) >= 0.5) {
              ++symmetric;
              const double gap = std::abs(sim - best) / best;
              worst_gap = std::max(worst_gap, gap);
              if (gap > 1e-12) ++unequal;
            }
          }
        }
      }
    }
  }
  return {below == 0 && unequal == 0,
          std::to_string(pairs) + " (schedule, profile) pairs, " +
              std::to_string(below) + " below the oracle; " +
              std::to_string(symmetric) + " symmetric no-reuse pairs, " +
              std::to_string(unequal) + " unequal " +
              fmt("(worst relative gap %.2e)", worst_gap)};
}

}  // namespace
}  // namespace moesim

int main() {
  using moesim::Outcome;
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"memory model exactness", moesim::memory_exactness},
      {"saving ratio", moesim::saving_ratio},
      {"cost model agrees with simulator", moesim::cost_agreement},
      {"strategy crossover", moesim::crossover},
      {"adaptive granularity equivalence", moesim::adaptive_equivalence},
      {"pipeline speedup", moesim::pipeline_speedup},
      {"schedule validity", moesim::validity_suite},
      {"oracle equivalence", moesim::oracle_equivalence},
  };
  int failed = 0;
  int index = 1;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL",
                index++, c.name, o.detail.c_str(), secs);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
