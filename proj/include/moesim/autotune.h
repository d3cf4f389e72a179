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

// Online pipeline-granularity search. Batch sizes whose best partition
// count is known are grouped into disjoint ranges, one per partition count,
// under the assumption that the best count grows with the batch size; an
// exact-match cache sits in front of the range lookup.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <unordered_map>
#include <vector>

#include "moesim/core.h"

namespace moesim {

struct TrialRequest {
  const ModelSpec* spec = nullptr;
  const HardwareProfile* hw = nullptr;
  ReuseStrategy strategy;
  Count tokens = 0;
  Count partitions = 1;
};

/// Produces one makespan measurement for a candidate configuration.
class MeasurementAdapter {
 public:
  virtual ~MeasurementAdapter() = default;
  virtual double measure(const TrialRequest& request) = 0;
};

/// Simulates a forward+backward step. Reuse is applied when the strategy
/// asks for it and there are at least two partitions.
class SimulatorAdapter : public MeasurementAdapter {
 public:
  double measure(const TrialRequest& request) override;
};

/// Simulator measurement times a seeded factor drawn from
/// N(1, relative_sigma), floored at 0.05.
class NoisySimulatorAdapter : public MeasurementAdapter {
 public:
  NoisySimulatorAdapter(std::uint64_t seed, double relative_sigma)
      : rng_(seed), noise_(1.0, relative_sigma) {}
  double measure(const TrialRequest& request) override;

 private:
  SimulatorAdapter base_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_;
};

/// Makespan of one simulated step for the request.
double simulate_step_makespan(const TrialRequest& request);

struct TrialBudget {
  std::vector<Count> candidates = {1, 2, 4, 8, 16};
  int trials_per_candidate = 1;
  /// Candidates whose micro-batch would fall below this are skipped.
  Count min_micro_batch = 1;
  std::shared_ptr<MeasurementAdapter> adapter =
      std::make_shared<SimulatorAdapter>();

  /// Nonempty, strictly ascending, all >= 1, trial count >= 1.
  void validate() const;
};

struct CandidateMeasurement {
  Count partitions = 0;
  double mean_makespan = 0.0;
};

struct SearchResult {
  Count partitions = 0;
  double makespan = 0.0;
  int trials = 0;
  std::vector<CandidateMeasurement> measurements;
};

/// Averages trials per feasible candidate and returns the argmin (ties to
/// the smaller count). Throws kNoCandidate if no candidate fits.
SearchResult search_best_gran(Count tokens, const ModelSpec& spec,
                              const HardwareProfile& hw,
                              ReuseStrategy strategy,
                              const TrialBudget& budget);

struct GranularityRange {
  Count lower = 0;
  Count upper = 0;
  Count partitions = 0;

  bool contains(Count b) const { return lower <= b && b <= upper; }
  friend bool operator==(const GranularityRange&,
                         const GranularityRange&) = default;
};

/// Disjoint batch-size ranges keyed by lower bound, each mapped to its best
/// partition count, plus an exact-match cache.
class GranularityIndex {
 public:
  GranularityIndex();
  GranularityIndex(const GranularityIndex& other);
  GranularityIndex& operator=(const GranularityIndex& other);

  /// The range containing `tokens`, if any.
  std::optional<GranularityRange> find(Count tokens) const;
  /// The range currently assigned to `partitions`, if any.
  std::optional<GranularityRange> find_partitions(Count partitions) const;

  /// Inserts a new range. Throws kInvalidArgument on overlap or if the
  /// partition count already owns a range.
  void insert(const GranularityRange& range);

  struct Extension {
    GranularityRange range;
    bool covers = true;   // the extended range now contains the batch size
    bool clipped = false;
  };
  /// Grows the range of `partitions` towards `tokens`, stopping short of
  /// any neighbour (range or orphaned cache point) with a different count.
  Extension extend(Count partitions, Count tokens);

  std::optional<Count> cached(Count tokens) const;
  void cache(Count tokens, Count partitions);

  std::vector<GranularityRange> ranges() const;
  std::size_t size() const { return ranges_.size(); }
  std::size_t cache_size() const { return cache_.size(); }
  std::size_t conflicts() const { return conflicts_; }

  /// Key comparisons made by the ordered range set since the last reset.
  std::uint64_t comparisons() const { return *comparisons_; }
  void reset_comparisons() { *comparisons_ = 0; }

  /// Ranges disjoint and ordered; every cached batch size inside a range
  /// maps to that range's count. Returns a description of the first
  /// violation, or empty.
  std::string integrity_error() const;
  /// True when partition counts never decrease along the ranges.
  bool monotonic() const;

 private:
  struct CountingLess {
    std::uint64_t* counter;
    bool operator()(Count a, Count b) const {
      ++*counter;
      return a < b;
    }
  };
  struct Entry {
    Count upper;
    Count partitions;
  };
  using RangeMap = std::map<Count, Entry, CountingLess>;

  RangeMap::const_iterator locate(Count tokens) const;
  void rebuild_from(const GranularityIndex& other);

  std::unique_ptr<std::uint64_t> comparisons_;
  RangeMap ranges_;
  std::unordered_map<Count, Count> by_partitions_;  // n -> lower bound
  std::unordered_map<Count, Count> cache_;
  // Cached batch sizes left outside every range by a clipped extension.
  std::map<Count, Count> orphans_;
  std::size_t conflicts_ = 0;
};

struct GranularityDecision {
  Count partitions = 0;
  int trials = 0;
  bool cache_hit = false;
  bool range_hit = false;
  bool searched = false;
  bool extended = false;
  bool inserted = false;
};

/// Index plus everything a search needs. Calls must be serialized.
class AdaptiveGranularity {
 public:
  AdaptiveGranularity(ModelSpec spec, HardwareProfile hw,
                      ReuseStrategy strategy, TrialBudget budget);

  GranularityDecision decide(Count tokens);
  Count operator()(Count tokens) { return decide(tokens).partitions; }

  const GranularityIndex& index() const { return index_; }
  std::uint64_t searches() const { return searches_; }
  std::uint64_t total_trials() const { return total_trials_; }
  std::uint64_t calls() const { return calls_; }
  std::uint64_t cache_hits() const { return cache_hits_; }
  std::uint64_t range_hits() const { return range_hits_; }
  std::uint64_t extensions() const { return extensions_; }
  std::uint64_t insertions() const { return insertions_; }

 private:
  ModelSpec spec_;
  HardwareProfile hw_;
  ReuseStrategy strategy_;
  TrialBudget budget_;
  GranularityIndex index_;
  std::uint64_t searches_ = 0;
  std::uint64_t total_trials_ = 0;
  std::uint64_t calls_ = 0;
  std::uint64_t cache_hits_ = 0;
  std::uint64_t range_hits_ = 0;
  std::uint64_t extensions_ = 0;
  std::uint64_t insertions_ = 0;
};

/// Runs adaptive_granularity for one batch size against a context.
inline Count adaptive_granularity(Count tokens, AdaptiveGranularity& ctx) {
  return ctx(tokens);
}

enum class WorkloadDistribution {
  kUniform,  // uniform over {min, min+step, ..., max}
  kZipf,     // P(k-th grid point) proportional to 1 / (k+1)^exponent
};

struct WorkloadSpec {
  std::uint64_t seed = 0;
  Count iterations = 1;
  Count min_tokens = 1024;
  Count max_tokens = 32768;
  Count step = 1024;
  WorkloadDistribution distribution = WorkloadDistribution::kUniform;
  double exponent = 1.2;
};

/// Deterministic for a given spec. Throws kConfig on invalid bounds.
std::vector<Count> generate_workload(const WorkloadSpec& spec);

}  // namespace moesim
