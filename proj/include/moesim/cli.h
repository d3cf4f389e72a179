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

// Subcommands of the moesim tool. Each one is also callable as a function
// so tests can inspect the produced documents directly.

#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "moesim/config.h"
#include "moesim/pipesim.h"
#include "moesim/report.h"

namespace moesim {

/// Strategy and reuse flag for a run with the given micro-batch size.
struct ResolvedStrategy {
  ReuseStrategy strategy;
  bool reuse = false;
};
ResolvedStrategy resolve_strategy(const ExperimentConfig& config,
                                  Count partitions);

struct MemorySummary {
  Count partitions = 1;
  ResolvedStrategy strategy;
  MemoryReport baseline;
  std::optional<MemoryReport> pipeline;  // n >= 2
  std::optional<MemoryReport> reused;    // reuse requested
  std::optional<Count> savings_per_category;
  std::optional<double> saving_ratio;
  // Peaks measured on simulated step schedules.
  MemoryReport simulated_no_reuse;
  std::optional<MemoryReport> simulated_reused;
  std::optional<double> simulated_ratio;
};
MemorySummary summarize_memory(const ExperimentConfig& config);
ojson memory_json(const ExperimentConfig& config, const MemorySummary& summary);
std::string memory_table(const ExperimentConfig& config,
                         const MemorySummary& summary);

ojson plan_json(const ExperimentConfig& config);

struct SimulationRun {
  Schedule schedule;
  Trace trace;
  MemoryProfile memory;
  Validity validity;
  ResolvedStrategy strategy;
};
/// Adaptive partitioning is resolved with one exhaustive search.
SimulationRun run_simulation(const ExperimentConfig& config,
                             ScheduleScope scope);
ojson simulate_json(const ExperimentConfig& config, const SimulationRun& run);

/// JSON lines: one per workload iteration, then the summary.
std::string run_search(const ExperimentConfig& config);

/// CSV with sweep_columns() as header. Cells run on up to `threads`
/// threads; the output does not depend on the thread count.
std::string run_sweep(const ExperimentConfig& config, unsigned threads);

/// Entry point of the tool. `args` excludes the program name. Returns the
/// process exit status: 0 on success, 2 on usage errors, 1 otherwise.
int run_subcommand(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err);
int run_subcommand(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err);

}  // namespace moesim
