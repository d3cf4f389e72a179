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

// Experiment configuration: a JSON document with model, hardware, batch,
// pipeline, strategy and output sections. Unknown keys are rejected with
// their full key path.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "moesim/autotune.h"
#include "moesim/core.h"

namespace moesim {

enum class TraceFormat { kJsonl, kTraceEvent };
TraceFormat parse_trace_format(std::string_view name);

enum class StrategyMode { kNone, kAuto, kExplicit };

struct StrategySetting {
  StrategyMode mode = StrategyMode::kNone;
  ReuseStrategy explicit_strategy;

  static StrategySetting parse(std::string_view name);
  std::string name() const;
  bool reuses() const { return mode != StrategyMode::kNone; }
};

struct PipelineConfig {
  bool adaptive = false;
  Count partitions = 1;
  std::vector<Count> candidates = {1, 2, 4, 8, 16};
  int trials = 1;
  Count min_micro_batch = 1;
  /// Relative sigma of multiplicative measurement noise (0 = noiseless).
  double noise = 0.0;
};

struct BatchConfig {
  Count tokens = 16384;
  std::optional<WorkloadSpec> workload;
};

struct SweepConfig {
  std::vector<Count> partitions = {1, 2, 4, 8};
  std::vector<Count> batches = {4096, 8192, 12288, 16384,
                                20480, 24576, 28672, 32768};
  std::vector<std::string> strategies = {"none"};
};

struct OutputConfig {
  std::string path;        // empty: stdout
  std::string trace_path;  // simulate only
  TraceFormat trace_format = TraceFormat::kJsonl;
  std::string format = "json";  // memory: json | table
};

struct ExperimentConfig {
  ModelSpec model = model_preset("moe-gpt3-s");
  std::string preset = "moe-gpt3-s";  // empty for explicit dimensions
  HardwareProfile hardware;
  BatchConfig batch;
  PipelineConfig pipeline;
  StrategySetting strategy;
  std::uint64_t seed = 0;
  SweepConfig sweep;
  OutputConfig output;

  /// Re-checks every cross-field constraint; throws kConfig.
  void validate() const;
};

/// Parses a configuration document. `source` names it in error messages.
/// Throws kParse (with line and column) or kConfig (with key path).
ExperimentConfig parse_config(std::string_view text,
                              std::string_view source = "<config>");
ExperimentConfig load_config(const std::string& path);

/// Applies one JSON section on top of an existing configuration.
void apply_config(ExperimentConfig& config, const nlohmann::json& doc);

/// The hardware section as JSON (inverse of the hardware parser).
nlohmann::ordered_json hardware_to_json(const HardwareProfile& hw);

}  // namespace moesim
