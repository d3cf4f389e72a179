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

#include "moesim/autotune.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "moesim/pipesim.h"

namespace moesim {

double simulate_step_makespan(const TrialRequest& request) {
  const bool reuse = request.strategy.reuses() && request.partitions >= 2;
  const Schedule schedule = build_schedule(
      *request.spec, BatchSpec(request.tokens, request.partitions),
      reuse ? request.strategy : ReuseStrategy(), reuse, ScheduleScope::kStep);
  return simulate(schedule, *request.hw).makespan();
}

double SimulatorAdapter::measure(const TrialRequest& request) {
  return simulate_step_makespan(request);
}

double NoisySimulatorAdapter::measure(const TrialRequest& request) {
  const double base = base_.measure(request);
  return base * std::max(0.05, noise_(rng_));
}

void TrialBudget::validate() const {
  if (candidates.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "candidate set is empty");
  }
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i] < 1 || (i > 0 && candidates[i] <= candidates[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument,
                  "candidates must be >= 1 and strictly ascending");
    }
  }
  if (trials_per_candidate < 1) {
    throw Error(ErrorCode::kInvalidArgument, "trial count must be >= 1");
  }
  if (min_micro_batch < 1) {
    throw Error(ErrorCode::kInvalidArgument, "min_micro_batch must be >= 1");
  }
  if (!adapter) {
    throw Error(ErrorCode::kInvalidArgument, "no measurement adapter");
  }
}

SearchResult search_best_gran(Count tokens, const ModelSpec& spec,
                              const HardwareProfile& hw,
                              ReuseStrategy strategy,
                              const TrialBudget& budget) {
  budget.validate();
  if (tokens < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  }
  SearchResult result;
  for (Count n : budget.candidates) {
    if (n > tokens || micro_batch_size(tokens, n) < budget.min_micro_batch) {
      continue;
    }
    TrialRequest req{&spec, &hw, strategy, tokens, n};
    double sum = 0.0;
    for (int t = 0; t < budget.trials_per_candidate; ++t) {
      sum += budget.adapter->measure(req);
      ++result.trials;
    }
    const double mean = sum / budget.trials_per_candidate;
    result.measurements.push_back({n, mean});
    if (result.partitions == 0 || mean < result.makespan) {
      result.partitions = n;
      result.makespan = mean;
    }
  }
  if (result.partitions == 0) {
    throw Error(ErrorCode::kNoCandidate,
                "no candidate partition count fits batch size " +
                    std::to_string(tokens));
  }
  return result;
}

GranularityIndex::GranularityIndex()
    : comparisons_(std::make_unique<std::uint64_t>(0)),
      ranges_(CountingLess{comparisons_.get()}) {}

GranularityIndex::GranularityIndex(const GranularityIndex& other)
    : GranularityIndex() {
  rebuild_from(other);
}

GranularityIndex& GranularityIndex::operator=(const GranularityIndex& other) {
  if (this != &other) {
    ranges_.clear();
    rebuild_from(other);
  }
  return *this;
}

void GranularityIndex::rebuild_from(const GranularityIndex& other) {
  for (const auto& [lower, entry] : other.ranges_) ranges_.emplace(lower, entry);
  by_partitions_ = other.by_partitions_;
  cache_ = other.cache_;
  orphans_ = other.orphans_;
  conflicts_ = other.conflicts_;
  *comparisons_ = 0;
}

GranularityIndex::RangeMap::const_iterator GranularityIndex::locate(
    Count tokens) const {
  auto it = ranges_.upper_bound(tokens);
  if (it == ranges_.begin()) return ranges_.end();
  --it;
  return it->second.upper >= tokens ? it : ranges_.end();
}

std::optional<GranularityRange> GranularityIndex::find(Count tokens) const {
  const auto it = locate(tokens);
  if (it == ranges_.end()) return std::nullopt;
  return GranularityRange{it->first, it->second.upper, it->second.partitions};
}

std::optional<GranularityRange> GranularityIndex::find_partitions(
    Count partitions) const {
  const auto key = by_partitions_.find(partitions);
  if (key == by_partitions_.end()) return std::nullopt;
  const auto it = ranges_.find(key->second);
  return GranularityRange{it->first, it->second.upper, it->second.partitions};
}

void GranularityIndex::insert(const GranularityRange& range) {
  if (range.lower > range.upper) {
    throw Error(ErrorCode::kInvalidArgument, "empty granularity range");
  }
  if (by_partitions_.count(range.partitions)) {
    throw Error(ErrorCode::kInvalidArgument,
                "partition count already owns a range");
  }
  // The first range starting after range.lower, and the one before it.
  auto next = ranges_.upper_bound(range.lower);
  if (next != ranges_.end() && next->first <= range.upper) {
    throw Error(ErrorCode::kInvalidArgument, "granularity ranges overlap");
  }
  if (next != ranges_.begin()) {
    auto prev = std::prev(next);
    if (prev->second.upper >= range.lower) {
      throw Error(ErrorCode::kInvalidArgument, "granularity ranges overlap");
    }
  }
  ranges_.emplace_hint(next, range.lower,
                       Entry{range.upper, range.partitions});
  by_partitions_[range.partitions] = range.lower;
  for (auto it = orphans_.lower_bound(range.lower);
       it != orphans_.end() && it->first <= range.upper;) {
    it = orphans_.erase(it);
  }
}

GranularityIndex::Extension GranularityIndex::extend(Count partitions,
                                                     Count tokens) {
  const auto key = by_partitions_.find(partitions);
  if (key == by_partitions_.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                "no range to extend for partition count " +
                    std::to_string(partitions));
  }
  auto it = ranges_.find(key->second);
  Count lower = it->first;
  Count upper = it->second.upper;
  Extension ext;

  if (tokens < lower) {
    Count new_lower = tokens;
    if (it != ranges_.begin()) {
      const auto prev = std::prev(it);
      if (prev->second.upper >= new_lower) {
        new_lower = prev->second.upper + 1;
        ext.clipped = true;
      }
    }
    for (auto o = orphans_.lower_bound(lower); o != orphans_.begin();) {
      --o;
      if (o->first < new_lower) break;
      if (o->second != partitions) {
        new_lower = o->first + 1;
        ext.clipped = true;
        break;
      }
    }
    lower = new_lower;
  } else if (tokens > upper) {
    Count new_upper = tokens;
    const auto next = std::next(it);
    if (next != ranges_.end() && next->first <= new_upper) {
      new_upper = next->first - 1;
      ext.clipped = true;
    }
    for (auto o = orphans_.upper_bound(upper);
         o != orphans_.end() && o->first <= new_upper; ++o) {
      if (o->second != partitions) {
        new_upper = o->first - 1;
        ext.clipped = true;
        break;
      }
    }
    upper = new_upper;
  }

  if (lower != it->first || upper != it->second.upper) {
    const auto hint = ranges_.erase(it);
    ranges_.emplace_hint(hint, lower, Entry{upper, partitions});
    by_partitions_[partitions] = lower;
    for (auto o = orphans_.lower_bound(lower);
         o != orphans_.end() && o->first <= upper;) {
      o = orphans_.erase(o);
    }
  }
  if (ext.clipped) ++conflicts_;
  ext.range = GranularityRange{lower, upper, partitions};
  ext.covers = ext.range.contains(tokens);
  return ext;
}

std::optional<Count> GranularityIndex::cached(Count tokens) const {
  const auto it = cache_.find(tokens);
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

void GranularityIndex::cache(Count tokens, Count partitions) {
  cache_[tokens] = partitions;
  if (locate(tokens) == ranges_.end()) orphans_[tokens] = partitions;
}

std::vector<GranularityRange> GranularityIndex::ranges() const {
  std::vector<GranularityRange> out;
  out.reserve(ranges_.size());
  for (const auto& [lower, e] : ranges_) {
    out.push_back({lower, e.upper, e.partitions});
  }
  return out;
}

std::string GranularityIndex::integrity_error() const {
  std::ostringstream err;
  const GranularityRange* prev = nullptr;
  const auto all = ranges();
  for (const GranularityRange& r : all) {
    if (r.lower > r.upper) {
      err << "range [" << r.lower << ", " << r.upper << "] is empty";
      return err.str();
    }
    if (prev && prev->upper >= r.lower) {
      err << "ranges [" << prev->lower << ", " << prev->upper << "] and ["
          << r.lower << ", " << r.upper << "] overlap";
      return err.str();
    }
    const auto owner = by_partitions_.find(r.partitions);
    if (owner == by_partitions_.end() || owner->second != r.lower) {
      err << "partition count " << r.partitions << " not indexed";
      return err.str();
    }
    prev = &r;
  }
  if (by_partitions_.size() != all.size()) return "stale partition entries";
  for (const auto& [b, n] : cache_) {
    const auto it = locate(b);
    if (it != ranges_.end() && it->second.partitions != n) {
      err << "cached " << b << " -> " << n << " but its range maps to "
          << it->second.partitions;
      return err.str();
    }
  }
  return {};
}

bool GranularityIndex::monotonic() const {
  Count last = 0;
  for (const auto& [lower, e] : ranges_) {
    if (e.partitions < last) return false;
    last = e.partitions;
  }
  return true;
}

AdaptiveGranularity::AdaptiveGranularity(ModelSpec spec, HardwareProfile hw,
                                         ReuseStrategy strategy,
                                         TrialBudget budget)
    : spec_(spec), hw_(hw), strategy_(strategy), budget_(std::move(budget)) {
  hw_.validate();
  budget_.validate();
}

GranularityDecision AdaptiveGranularity::decide(Count tokens) {
  if (tokens < 1) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be >= 1");
  }
  ++calls_;
  GranularityDecision d;
  if (auto hit = index_.cached(tokens)) {
    ++cache_hits_;
    d.cache_hit = true;
    d.partitions = *hit;
    return d;
  }
  if (auto range = index_.find(tokens)) {
    ++range_hits_;
    d.range_hit = true;
    d.partitions = range->partitions;
  } else {
    const SearchResult found =
        search_best_gran(tokens, spec_, hw_, strategy_, budget_);
    ++searches_;
    total_trials_ += static_cast<std::uint64_t>(found.trials);
    d.searched = true;
    d.trials = found.trials;
    d.partitions = found.partitions;
    if (index_.find_partitions(found.partitions)) {
      index_.extend(found.partitions, tokens);
      ++extensions_;
      d.extended = true;
    } else {
      index_.insert({tokens, tokens, found.partitions});
      ++insertions_;
      d.inserted = true;
    }
  }
  index_.cache(tokens, d.partitions);
  return d;
}

std::vector<Count> generate_workload(const WorkloadSpec& spec) {
  if (spec.iterations < 1) {
    throw Error(ErrorCode::kConfig, "workload iterations must be >= 1");
  }
  if (spec.min_tokens < 1 || spec.min_tokens > spec.max_tokens) {
    throw Error(ErrorCode::kConfig,
                "workload bounds must satisfy 1 <= min <= max");
  }
  if (spec.step < 1) {
    throw Error(ErrorCode::kConfig, "workload step must be >= 1");
  }
  if (spec.distribution == WorkloadDistribution::kZipf &&
      !(spec.exponent > 0.0)) {
    throw Error(ErrorCode::kConfig, "zipf exponent must be > 0");
  }
  const Count points = (spec.max_tokens - spec.min_tokens) / spec.step + 1;
  std::mt19937_64 rng(spec.seed);
  std::vector<Count> out;
  out.reserve(static_cast<size_t>(spec.iterations));
  if (spec.distribution == WorkloadDistribution::kUniform) {
    std::uniform_int_distribution<Count> pick(0, points - 1);
    for (Count i = 0; i < spec.iterations; ++i) {
      out.push_back(spec.min_tokens + pick(rng) * spec.step);
    }
  } else {
    std::vector<double> weights(static_cast<size_t>(points));
    for (Count k = 0; k < points; ++k) {
      weights[static_cast<size_t>(k)] =
          1.0 / std::pow(static_cast<double>(k + 1), spec.exponent);
    }
    std::discrete_distribution<Count> pick(weights.begin(), weights.end());
    for (Count i = 0; i < spec.iterations; ++i) {
      out.push_back(spec.min_tokens + pick(rng) * spec.step);
    }
  }
  return out;
}

}  // namespace moesim
