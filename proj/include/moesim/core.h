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

// Domain types shared by the memory model, cost model, simulator and
// autotuner. Memory quantities are element counts; bytes appear only when
// reporting.

#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace moesim {

using Count = std::int64_t;

enum class ErrorCode {
  kInvalidArgument,
  kInvalidPartitioning,
  kReuseNotApplicable,
  kScheduleConstruction,
  kOracleSize,
  kNoCandidate,
  kConfig,
  kParse,
  kIo,
  kUsage,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Dimensions of one MoE layer and the expert-parallel group size.
class ModelSpec {
 public:
  ModelSpec(Count model_dim, Count hidden_dim, Count num_experts,
            Count num_nodes, int element_bytes = 2);

  Count model_dim() const { return model_dim_; }
  Count hidden_dim() const { return hidden_dim_; }
  Count num_experts() const { return num_experts_; }
  Count num_nodes() const { return num_nodes_; }
  int element_bytes() const { return element_bytes_; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

 private:
  Count model_dim_;
  Count hidden_dim_;
  Count num_experts_;
  Count num_nodes_;
  int element_bytes_;
};

/// Named model presets (lower-case names, e.g. "moe-gpt3-s").
ModelSpec model_preset(std::string_view name, Count num_nodes = 8);
std::vector<std::string> model_preset_names();

/// ceil(B/n). Throws kInvalidPartitioning when n == 0 or n > B.
Count micro_batch_size(Count tokens, Count partitions);

/// Token batch and its partitioning. Partition sizes differ by at most one
/// token, larger partitions first, so the largest equals ceil(B/n).
class BatchSpec {
 public:
  BatchSpec(Count tokens, Count partitions);

  Count tokens() const { return tokens_; }
  Count partitions() const { return partitions_; }
  Count micro_batch() const { return micro_batch_size(tokens_, partitions_); }
  Count partition_tokens(Count index) const;
  bool uniform() const { return tokens_ % partitions_ == 0; }

  friend bool operator==(const BatchSpec&, const BatchSpec&) = default;

 private:
  Count tokens_;
  Count partitions_;
};

enum class StreamKind : int { kCompute = 0, kCollective = 1, kCopy = 2 };
inline constexpr std::array<StreamKind, 3> kAllStreams = {
    StreamKind::kCompute, StreamKind::kCollective, StreamKind::kCopy};
std::string_view stream_name(StreamKind kind);

/// Bit set over StreamKind.
class KindSet {
 public:
  constexpr KindSet() = default;
  constexpr KindSet(std::initializer_list<StreamKind> kinds) {
    for (StreamKind k : kinds) bits_ |= bit(k);
  }
  static constexpr KindSet from_bits(unsigned bits) {
    KindSet s;
    s.bits_ = bits & 7u;
    return s;
  }
  constexpr bool contains(StreamKind k) const { return (bits_ & bit(k)) != 0; }
  constexpr KindSet with(StreamKind k) const { return from_bits(bits_ | bit(k)); }
  constexpr KindSet without(StreamKind k) const {
    return from_bits(bits_ & ~bit(k));
  }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr unsigned bits() const { return bits_; }
  friend constexpr bool operator==(KindSet, KindSet) = default;

 private:
  static constexpr unsigned bit(StreamKind k) {
    return 1u << static_cast<int>(k);
  }
  unsigned bits_ = 0;
};

/// Rate multipliers for an operation kind given the set of other kinds
/// running concurrently. The entry for the empty set is pinned to 1.
class SlowdownTable {
 public:
  SlowdownTable();  // all ones

  double factor(StreamKind kind, KindSet others) const;
  void set(StreamKind kind, KindSet others, double multiplier);

  // Named entries used by the cost model.
  double mu_comp() const;   // comm | comp
  double mu_all() const;    // comm | comp, copy
  double eta_all() const;   // copy | comp, comm
  double sigma_comm() const;  // comp | comm
  double sigma_all() const;   // comp | comm, copy

  friend bool operator==(const SlowdownTable&, const SlowdownTable&) = default;

 private:
  std::array<std::array<double, 8>, 3> table_;
};

struct HardwareProfile {
  double w_comp = 1.0e14;  // element-operations / s
  double w_comm = 2.5e10;  // elements / s
  double w_mem = 1.2e10;   // elements / s
  SlowdownTable slowdown;
  /// Seconds paid at the start of every operation, per stream kind.
  std::array<double, 3> launch_overhead = {20e-6, 20e-6, 20e-6};
  /// Micro-batch size (tokens) at which compute reaches full rate.
  double compute_saturation = 1024.0;

  void set_launch_overhead(double seconds) {
    launch_overhead = {seconds, seconds, seconds};
  }
  double launch(StreamKind kind) const {
    return launch_overhead[static_cast<int>(kind)];
  }
  double base_speed(StreamKind kind) const;
  /// min(1, tokens / compute_saturation)
  double saturation(double tokens) const;

  /// Throws kInvalidArgument naming the offending field.
  void validate() const;
};

enum class RestoreDI { kKept, kOffload, kCommunicate };
enum class RestoreM { kKept, kOffload, kRecompute };
enum class MuMode { kComp, kAll };
enum class EtaMode { kUnused, kAll };

using Workload = std::array<int, 3>;  // [compute, collective, copy]

/// Memory reusing strategy and its per-stream workload vectors.
class ReuseStrategy {
 public:
  enum class Kind { kNoReuse = 0, kS1, kS2, kS3, kS4 };

  constexpr ReuseStrategy() = default;
  constexpr explicit ReuseStrategy(Kind kind) : kind_(kind) {}

  static ReuseStrategy parse(std::string_view name);
  static constexpr std::array<Kind, 4> reusing() {
    return {Kind::kS1, Kind::kS2, Kind::kS3, Kind::kS4};
  }

  constexpr Kind kind() const { return kind_; }
  constexpr bool reuses() const { return kind_ != Kind::kNoReuse; }
  std::string_view name() const;

  constexpr RestoreDI restore_dispatched_input() const {
    constexpr std::array<RestoreDI, 5> t = {
        RestoreDI::kKept, RestoreDI::kOffload, RestoreDI::kCommunicate,
        RestoreDI::kOffload, RestoreDI::kCommunicate};
    return t[static_cast<int>(kind_)];
  }
  constexpr RestoreM restore_middle() const {
    constexpr std::array<RestoreM, 5> t = {RestoreM::kKept, RestoreM::kOffload,
                                           RestoreM::kOffload,
                                           RestoreM::kRecompute,
                                           RestoreM::kRecompute};
    return t[static_cast<int>(kind_)];
  }
  constexpr Workload q_fw() const {
    constexpr std::array<Workload, 5> t = {
        {{2, 2, 0}, {2, 2, 5}, {2, 2, 4}, {2, 2, 1}, {2, 2, 0}}};
    return t[static_cast<int>(kind_)];
  }
  constexpr Workload q_bw() const {
    constexpr std::array<Workload, 5> t = {
        {{4, 2, 0}, {4, 2, 5}, {4, 3, 4}, {5, 2, 1}, {5, 3, 0}}};
    return t[static_cast<int>(kind_)];
  }
  constexpr MuMode mu_mode() const {
    return (kind_ == Kind::kNoReuse || kind_ == Kind::kS4) ? MuMode::kComp
                                                          : MuMode::kAll;
  }
  constexpr EtaMode eta_mode() const {
    return (kind_ == Kind::kNoReuse || kind_ == Kind::kS4) ? EtaMode::kUnused
                                                          : EtaMode::kAll;
  }

  friend constexpr bool operator==(ReuseStrategy, ReuseStrategy) = default;

 private:
  Kind kind_ = Kind::kNoReuse;
};

// Copy volume of each restored tensor, in v_mem units.
inline constexpr int kCopyUnitsDispatchedInput = 1;
inline constexpr int kCopyUnitsMiddle = 4;

enum class TensorRole {
  kInput,             // T_I
  kDispatchedInput,   // T_DI
  kMiddle,            // T_M
  kDispatchedOutput,  // T_DO
  kOutput,            // T_O
};
inline constexpr std::array<TensorRole, 5> kAllRoles = {
    TensorRole::kInput, TensorRole::kDispatchedInput, TensorRole::kMiddle,
    TensorRole::kDispatchedOutput, TensorRole::kOutput};
std::string_view role_name(TensorRole role);

/// Row width of a tensor: H for T_M, M otherwise.
Count role_width(const ModelSpec& spec, TensorRole role);
/// Elements of a tensor (or partition) holding `tokens` rows.
inline Count role_elements(const ModelSpec& spec, TensorRole role,
                           Count tokens) {
  return tokens * role_width(spec, role);
}

enum class Direction { kForward, kBackward };
std::string_view direction_name(Direction d);

}  // namespace moesim
