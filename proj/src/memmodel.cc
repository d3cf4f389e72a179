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

#include "moesim/memmodel.h"

#include <string>

namespace moesim {
namespace {

void require_tokens(Count tokens) {
  if (tokens < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  }
}

void require_reuse(Count tokens, Count partitions) {
  require_tokens(tokens);
  if (partitions < 2) {
    throw Error(ErrorCode::kReuseNotApplicable,
                "memory reuse needs at least 2 partitions, got " +
                    std::to_string(partitions));
  }
  if (partitions > tokens) {
    throw Error(ErrorCode::kInvalidPartitioning,
                "more partitions than tokens");
  }
}

}  // namespace

MemoryReport make_memory_report(const ModelSpec& spec, Count model_states,
                                Count activations, Count buffers) {
  MemoryReport r;
  r.model_states = model_states;
  r.activations = activations;
  r.buffers = buffers;
  r.total = model_states + activations + buffers;
  r.element_bytes = spec.element_bytes();
  return r;
}

Count mem_model_states(const ModelSpec& spec) {
  const Count m = spec.model_dim();
  return 4 * (spec.num_experts() * m + 2 * spec.hidden_dim() * m);
}

Count mem_activations_baseline(const ModelSpec& spec, Count tokens) {
  require_tokens(tokens);
  return 4 * tokens * spec.model_dim() + tokens * spec.hidden_dim();
}

Count mem_buffers_baseline(const ModelSpec& spec, Count tokens) {
  require_tokens(tokens);
  return tokens * spec.model_dim() + tokens * spec.hidden_dim();
}

PipelineFootprint mem_pipeline(const ModelSpec& spec, Count tokens) {
  const Count v = mem_activations_baseline(spec, tokens);
  return {v, v};
}

Count mem_reuse_savings(const ModelSpec& spec, Count tokens, Count partitions) {
  require_reuse(tokens, partitions);
  const Count n = partitions;
  const Count per_token =
      2 * spec.model_dim() * (n - 2) + spec.hidden_dim() * (n - 1);
  return tokens * per_token / n;
}

double mem_saving_ratio(const ModelSpec& spec, Count tokens, Count partitions) {
  const Count saved = 2 * mem_reuse_savings(spec, tokens, partitions);
  const PipelineFootprint pipe = mem_pipeline(spec, tokens);
  const Count denom = mem_model_states(spec) + pipe.activations + pipe.buffers;
  return static_cast<double>(saved) / static_cast<double>(denom);
}

MemoryReport baseline_report(const ModelSpec& spec, Count tokens) {
  return make_memory_report(spec, mem_model_states(spec),
                            mem_activations_baseline(spec, tokens),
                            mem_buffers_baseline(spec, tokens));
}

MemoryReport pipeline_report(const ModelSpec& spec, Count tokens) {
  const PipelineFootprint pipe = mem_pipeline(spec, tokens);
  return make_memory_report(spec, mem_model_states(spec), pipe.activations,
                            pipe.buffers);
}

MemoryReport reuse_report(const ModelSpec& spec, Count tokens,
                          Count partitions) {
  const PipelineFootprint pipe = mem_pipeline(spec, tokens);
  const Count saved = mem_reuse_savings(spec, tokens, partitions);
  return make_memory_report(spec, mem_model_states(spec),
                            pipe.activations - saved, pipe.buffers - saved);
}

}  // namespace moesim
