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

#include "moesim/core.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace moesim {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidPartitioning: return "invalid-partitioning";
    case ErrorCode::kReuseNotApplicable: return "reuse-not-applicable";
    case ErrorCode::kScheduleConstruction: return "schedule-construction";
    case ErrorCode::kOracleSize: return "oracle-size";
    case ErrorCode::kNoCandidate: return "no-candidate";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kUsage: return "usage";
  }
  return "unknown";
}

ModelSpec::ModelSpec(Count model_dim, Count hidden_dim, Count num_experts,
                     Count num_nodes, int element_bytes)
    : model_dim_(model_dim),
      hidden_dim_(hidden_dim),
      num_experts_(num_experts),
      num_nodes_(num_nodes),
      element_bytes_(element_bytes) {
  if (model_dim < 1 || hidden_dim < 1 || num_experts < 1 || num_nodes < 1) {
    throw Error(ErrorCode::kInvalidArgument,
                "model dimensions, expert count and node count must be >= 1");
  }
  if (num_experts % num_nodes != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "num_experts (" + std::to_string(num_experts) +
                    ") must be divisible by num_nodes (" +
                    std::to_string(num_nodes) + ")");
  }
  if (element_bytes != 1 && element_bytes != 2 && element_bytes != 4 &&
      element_bytes != 8) {
    throw Error(ErrorCode::kInvalidArgument,
                "element_bytes must be one of 1, 2, 4, 8");
  }
}

namespace {

struct Preset {
  std::string_view name;
  Count model_dim;
  Count hidden_dim;
  Count num_experts;
};

constexpr std::array<Preset, 3> kPresets = {{
    {"moe-gpt3-s", 768, 3072, 64},
    {"moe-gpt3-xl", 2048, 8192, 64},
    {"moe-bert-l", 1024, 4096, 64},
}};

}  // namespace

ModelSpec model_preset(std::string_view name, Count num_nodes) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  for (const Preset& p : kPresets) {
    if (p.name == lower) {
      return ModelSpec(p.model_dim, p.hidden_dim, p.num_experts, num_nodes);
    }
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown model preset '" + std::string(name) + "'");
}

std::vector<std::string> model_preset_names() {
  std::vector<std::string> out;
  for (const Preset& p : kPresets) out.emplace_back(p.name);
  return out;
}

Count micro_batch_size(Count tokens, Count partitions) {
  if (tokens < 1) {
    throw Error(ErrorCode::kInvalidPartitioning, "batch size must be >= 1");
  }
  if (partitions < 1 || partitions > tokens) {
    throw Error(ErrorCode::kInvalidPartitioning,
                "partition count " + std::to_string(partitions) +
                    " outside [1, " + std::to_string(tokens) + "]");
  }
  return (tokens + partitions - 1) / partitions;
}

BatchSpec::BatchSpec(Count tokens, Count partitions)
    : tokens_(tokens), partitions_(partitions) {
  micro_batch_size(tokens, partitions);  // validates
}

Count BatchSpec::partition_tokens(Count index) const {
  if (index < 0 || index >= partitions_) {
    throw Error(ErrorCode::kInvalidArgument, "partition index out of range");
  }
  const Count base = tokens_ / partitions_;
  const Count extra = tokens_ % partitions_;
  return base + (index < extra ? 1 : 0);
}

std::string_view stream_name(StreamKind kind) {
  switch (kind) {
    case StreamKind::kCompute: return "compute";
    case StreamKind::kCollective: return "collective";
    case StreamKind::kCopy: return "copy";
  }
  return "?";
}

SlowdownTable::SlowdownTable() {
  for (auto& row : table_) row.fill(1.0);
}

double SlowdownTable::factor(StreamKind kind, KindSet others) const {
  return table_[static_cast<int>(kind)][others.without(kind).bits()];
}

void SlowdownTable::set(StreamKind kind, KindSet others, double multiplier) {
  others = others.without(kind);
  if (!(multiplier > 0.0 && multiplier <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "slowdown multiplier must be in (0, 1]");
  }
  if (others.empty() && multiplier != 1.0) {
    throw Error(ErrorCode::kInvalidArgument,
                "slowdown multiplier for a solo stream must be 1");
  }
  // Every bit pattern that differs only in the kind's own bit maps to the
  // same entry.
  const unsigned own = KindSet{kind}.bits();
  table_[static_cast<int>(kind)][others.bits()] = multiplier;
  table_[static_cast<int>(kind)][others.bits() | own] = multiplier;
}

double SlowdownTable::mu_comp() const {
  return factor(StreamKind::kCollective, {StreamKind::kCompute});
}
double SlowdownTable::mu_all() const {
  return factor(StreamKind::kCollective,
                {StreamKind::kCompute, StreamKind::kCopy});
}
double SlowdownTable::eta_all() const {
  return factor(StreamKind::kCopy,
                {StreamKind::kCompute, StreamKind::kCollective});
}
double SlowdownTable::sigma_comm() const {
  return factor(StreamKind::kCompute, {StreamKind::kCollective});
}
double SlowdownTable::sigma_all() const {
  return factor(StreamKind::kCompute,
                {StreamKind::kCollective, StreamKind::kCopy});
}

double HardwareProfile::base_speed(StreamKind kind) const {
  switch (kind) {
    case StreamKind::kCompute: return w_comp;
    case StreamKind::kCollective: return w_comm;
    case StreamKind::kCopy: return w_mem;
  }
  return 0.0;
}

double HardwareProfile::saturation(double tokens) const {
  return std::min(1.0, tokens / compute_saturation);
}

void HardwareProfile::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument,
                  std::string(name) + " must be a positive finite number");
    }
  };
  positive(w_comp, "w_comp");
  positive(w_comm, "w_comm");
  positive(w_mem, "w_mem");
  for (double eps : launch_overhead) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "launch_overhead must be >= 0");
    }
  }
  if (!(compute_saturation >= 1.0) || !std::isfinite(compute_saturation)) {
    throw Error(ErrorCode::kInvalidArgument, "compute_saturation must be >= 1");
  }
  for (StreamKind k : kAllStreams) {
    for (unsigned bits = 0; bits < 8; ++bits) {
      const double f = slowdown.factor(k, KindSet::from_bits(bits));
      if (!(f > 0.0 && f <= 1.0)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "slowdown multipliers must be in (0, 1]");
      }
    }
    if (slowdown.factor(k, KindSet{}) != 1.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "solo slowdown multiplier must be 1");
    }
  }
}

ReuseStrategy ReuseStrategy::parse(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (s == "none" || s == "noreuse") return ReuseStrategy(Kind::kNoReuse);
  if (s == "s1") return ReuseStrategy(Kind::kS1);
  if (s == "s2") return ReuseStrategy(Kind::kS2);
  if (s == "s3") return ReuseStrategy(Kind::kS3);
  if (s == "s4") return ReuseStrategy(Kind::kS4);
  throw Error(ErrorCode::kInvalidArgument,
              "unknown reuse strategy '" + std::string(name) + "'");
}

std::string_view ReuseStrategy::name() const {
  constexpr std::array<std::string_view, 5> names = {"none", "S1", "S2", "S3",
                                                     "S4"};
  return names[static_cast<int>(kind_)];
}

std::string_view role_name(TensorRole role) {
  switch (role) {
    case TensorRole::kInput: return "T_I";
    case TensorRole::kDispatchedInput: return "T_DI";
    case TensorRole::kMiddle: return "T_M";
    case TensorRole::kDispatchedOutput: return "T_DO";
    case TensorRole::kOutput: return "T_O";
  }
  return "?";
}

Count role_width(const ModelSpec& spec, TensorRole role) {
  return role == TensorRole::kMiddle ? spec.hidden_dim() : spec.model_dim();
}

std::string_view direction_name(Direction d) {
  return d == Direction::kForward ? "forward" : "backward";
}

}  // namespace moesim
