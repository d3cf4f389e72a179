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

// Closed-form memory footprint of one MoE layer: model states, activations
// and temporary buffers, with and without partition reuse. All results are
// element counts. Small routing tensors are not counted.

#pragma once

#include "moesim/core.h"

namespace moesim {

struct MemoryReport {
  Count model_states = 0;
  Count activations = 0;
  Count buffers = 0;
  Count total = 0;
  int element_bytes = 2;

  Count model_states_bytes() const { return model_states * element_bytes; }
  Count activations_bytes() const { return activations * element_bytes; }
  Count buffers_bytes() const { return buffers * element_bytes; }
  Count total_bytes() const { return total * element_bytes; }

  friend bool operator==(const MemoryReport&, const MemoryReport&) = default;
};

MemoryReport make_memory_report(const ModelSpec& spec, Count model_states,
                                Count activations, Count buffers);

/// Parameters, gradients and two Adam moments of the gate and one expert:
/// 4 (E M + 2 H M).
Count mem_model_states(const ModelSpec& spec);

/// Activations kept for backward without pipelining: 4 B M + B H.
Count mem_activations_baseline(const ModelSpec& spec, Count tokens);

/// Peak temporary buffers of a sequential backward (two adjacent tensors):
/// B M + B H.
Count mem_buffers_baseline(const ModelSpec& spec, Count tokens);

struct PipelineFootprint {
  Count activations = 0;
  Count buffers = 0;
};

/// Pipelined footprint without reuse; both categories are 4 B M + B H.
PipelineFootprint mem_pipeline(const ModelSpec& spec, Count tokens);

/// Per-category saving from reusing partition buffers,
/// floor(B (2 M (n - 2) + H (n - 1)) / n). Requires n >= 2.
Count mem_reuse_savings(const ModelSpec& spec, Count tokens, Count partitions);

/// Fraction of the pipelined footprint (model states included) saved by reuse.
double mem_saving_ratio(const ModelSpec& spec, Count tokens, Count partitions);

MemoryReport baseline_report(const ModelSpec& spec, Count tokens);
MemoryReport pipeline_report(const ModelSpec& spec, Count tokens);
/// Pipelined footprint after reuse (pipeline minus savings per category).
MemoryReport reuse_report(const ModelSpec& spec, Count tokens,
                          Count partitions);

}  // namespace moesim
