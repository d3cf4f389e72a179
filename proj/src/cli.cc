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

#include "moesim/cli.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "moesim/autotune.h"
#include "moesim/costmodel.h"
#include "moesim/memmodel.h"
#include "moesim/trace_export.h"

namespace moesim {

namespace {

Count fixed_partitions(const ExperimentConfig& cfg, std::string_view command) {
  if (cfg.pipeline.adaptive) {
    throw Error(ErrorCode::kUsage,
                std::string(command) + " needs a fixed partition count");
  }
  return cfg.pipeline.partitions;
}

TrialBudget budget_from(const ExperimentConfig& cfg) {
  TrialBudget budget;
  budget.candidates = cfg.pipeline.candidates;
  budget.trials_per_candidate = cfg.pipeline.trials;
  budget.min_micro_batch = cfg.pipeline.min_micro_batch;
  if (cfg.pipeline.noise > 0.0) {
    budget.adapter =
        std::make_shared<NoisySimulatorAdapter>(cfg.seed, cfg.pipeline.noise);
  }
  budget.validate();
  return budget;
}

// Strategy used while searching: auto depends on the partition count being
// searched for, so it is rejected.
ReuseStrategy search_strategy(const ExperimentConfig& cfg) {
  switch (cfg.strategy.mode) {
    case StrategyMode::kNone: return ReuseStrategy();
    case StrategyMode::kExplicit: return cfg.strategy.explicit_strategy;
    case StrategyMode::kAuto: break;
  }
  throw Error(ErrorCode::kUsage,
              "adaptive partitioning needs an explicit strategy, not auto");
}

MemoryReport simulated_peaks(const ExperimentConfig& cfg, Count n,
                             ResolvedStrategy rs) {
  const Schedule s = build_schedule(cfg.model, BatchSpec(cfg.batch.tokens, n),
                                    rs.strategy, rs.reuse, ScheduleScope::kStep);
  return measure_memory(s, simulate(s, cfg.hardware)).report();
}

ojson breakdown_json(const CostBreakdown& c) {
  return ojson{{"t_comp_us", duration_json(c.t_comp)},
               {"t_comm_us", duration_json(c.t_comm)},
               {"t_mem_us", duration_json(c.t_mem)},
               {"c_total_us", duration_json(c.c_total)}};
}

ojson strategy_cost_json(const HardwareProfile& hw, const StrategyCost& c) {
  const StreamFactors f = stream_factors(hw, c.strategy);
  return ojson{{"strategy", std::string(c.strategy.name())},
               {"sigma", f.sigma},
               {"mu", f.mu},
               {"eta", f.eta},
               {"forward", breakdown_json(c.forward)},
               {"backward", breakdown_json(c.backward)},
               {"total_us", duration_json(c.total)}};
}

void write_output(const std::string& text, const std::string& path,
                  std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::kIo, "cannot write output path " + path);
  file << text;
  file.flush();
  if (!file) throw Error(ErrorCode::kIo, "failed writing " + path);
}

}  // namespace

ResolvedStrategy resolve_strategy(const ExperimentConfig& cfg,
                                  Count partitions) {
  switch (cfg.strategy.mode) {
    case StrategyMode::kNone: return {};
    case StrategyMode::kExplicit:
      return {cfg.strategy.explicit_strategy, true};
    case StrategyMode::kAuto: break;
  }
  if (partitions < 2) {
    throw Error(ErrorCode::kReuseNotApplicable,
                "memory reuse needs at least 2 partitions");
  }
  const Count b = micro_batch_size(cfg.batch.tokens, partitions);
  return {select_strategy(cfg.model, cfg.hardware, b).chosen, true};
}

MemorySummary summarize_memory(const ExperimentConfig& cfg) {
  MemorySummary s;
  const Count n = fixed_partitions(cfg, "memory");
  const Count tokens = cfg.batch.tokens;
  micro_batch_size(tokens, n);
  s.partitions = n;
  s.strategy = resolve_strategy(cfg, n);
  s.baseline = baseline_report(cfg.model, tokens);
  if (n >= 2) s.pipeline = pipeline_report(cfg.model, tokens);
  s.simulated_no_reuse = simulated_peaks(cfg, n, {});
  if (s.strategy.reuse) {
    s.reused = reuse_report(cfg.model, tokens, n);
    s.savings_per_category = mem_reuse_savings(cfg.model, tokens, n);
    s.saving_ratio = mem_saving_ratio(cfg.model, tokens, n);
    s.simulated_reused = simulated_peaks(cfg, n, s.strategy);
    const double before = static_cast<double>(s.simulated_no_reuse.total);
    s.simulated_ratio =
        (before - static_cast<double>(s.simulated_reused->total)) / before;
  }
  return s;
}

ojson memory_json(const ExperimentConfig& cfg, const MemorySummary& s) {
  const int eb = cfg.model.element_bytes();
  auto optional_report = [](const std::optional<MemoryReport>& r) {
    return r ? memory_report_json(*r) : ojson(nullptr);
  };
  ojson j;
  j["report"] = kMemoryReport;
  j["model"] = model_json(cfg.model, cfg.preset);
  j["tokens"] = cfg.batch.tokens;
  j["partitions"] = s.partitions;
  j["strategy"] = std::string(s.strategy.strategy.name());
  j["reuse"] = s.strategy.reuse;
  j["baseline"] = memory_report_json(s.baseline);
  j["pipeline"] = optional_report(s.pipeline);
  j["reused"] = optional_report(s.reused);
  j["savings_per_category"] = s.savings_per_category
                                  ? amount_json(*s.savings_per_category, eb)
                                  : ojson(nullptr);
  j["saving_ratio"] = s.saving_ratio ? ojson(*s.saving_ratio) : ojson(nullptr);
  ojson sim;
  sim["strategy"] = std::string(s.strategy.strategy.name());
  sim["no_reuse"] = memory_report_json(s.simulated_no_reuse);
  sim["reused"] = optional_report(s.simulated_reused);
  sim["saving_ratio"] =
      s.simulated_ratio ? ojson(*s.simulated_ratio) : ojson(nullptr);
  j["simulated"] = std::move(sim);
  return j;
}

std::string memory_table(const ExperimentConfig& cfg, const MemorySummary& s) {
  std::ostringstream os;
  const ModelSpec& m = cfg.model;
  os << "model       " << (cfg.preset.empty() ? "custom" : cfg.preset)
     << " (M=" << m.model_dim() << ", H=" << m.hidden_dim()
     << ", E=" << m.num_experts() << ", N=" << m.num_nodes() << ")\n"
     << "tokens      " << cfg.batch.tokens << "\n"
     << "partitions  " << s.partitions << "\n"
     << "strategy    " << s.strategy.strategy.name() << "\n\n";

  struct Column {
    const char* title;
    std::optional<MemoryReport> report;
  };
  const std::vector<Column> columns = {
      {"baseline", s.baseline},
      {"pipeline", s.pipeline},
      {"reused", s.reused},
      {"sim", s.simulated_no_reuse},
      {"sim-reused", s.simulated_reused}};
  os << std::left << std::setw(14) << "elements";
  for (const Column& c : columns) os << std::right << std::setw(14) << c.title;
  os << "\n";
  using Getter = Count (*)(const MemoryReport&);
  const std::pair<const char*, Getter> rows[] = {
      {"model_states", [](const MemoryReport& r) { return r.model_states; }},
      {"activations", [](const MemoryReport& r) { return r.activations; }},
      {"buffers", [](const MemoryReport& r) { return r.buffers; }},
      {"total", [](const MemoryReport& r) { return r.total; }}};
  for (const auto& [name, get] : rows) {
    os << std::left << std::setw(14) << name;
    for (const Column& c : columns) {
      os << std::right << std::setw(14);
      if (c.report) {
        os << get(*c.report);
      } else {
        os << "-";
      }
    }
    os << "\n";
  }
  os << "\nsaving ratio ";
  if (s.saving_ratio) {
    os << std::fixed << std::setprecision(6) << *s.saving_ratio
       << " (simulated " << *s.simulated_ratio << ")\n";
  } else {
    os << "-\n";
  }
  return os.str();
}

ojson plan_json(const ExperimentConfig& cfg) {
  const Count n = fixed_partitions(cfg, "plan");
  const Count b = micro_batch_size(cfg.batch.tokens, n);
  const StrategySelection sel = select_strategy(cfg.model, cfg.hardware, b);
  ojson j;
  j["report"] = kPlanReport;
  j["model"] = model_json(cfg.model, cfg.preset);
  j["tokens"] = cfg.batch.tokens;
  j["partitions"] = n;
  j["micro_batch"] = b;
  j["alpha"] = alpha(cfg.hardware);
  j["beta"] = beta(cfg.hardware);
  ojson list = ojson::array();
  for (const StrategyCost& c : sel.candidates) {
    list.push_back(strategy_cost_json(cfg.hardware, c));
  }
  j["strategies"] = std::move(list);
  j["no_reuse"] = strategy_cost_json(cfg.hardware, sel.no_reuse);
  j["chosen"] = std::string(sel.chosen.name());
  return j;
}

SimulationRun run_simulation(const ExperimentConfig& cfg,
                             ScheduleScope scope) {
  Count n = 0;
  ResolvedStrategy rs;
  if (cfg.pipeline.adaptive) {
    const ReuseStrategy strategy = search_strategy(cfg);
    n = search_best_gran(cfg.batch.tokens, cfg.model, cfg.hardware, strategy,
                         budget_from(cfg))
            .partitions;
    rs = {strategy, strategy.reuses() && n >= 2};
    if (!rs.reuse) rs.strategy = ReuseStrategy();
  } else {
    n = cfg.pipeline.partitions;
    rs = resolve_strategy(cfg, n);
  }
  Schedule schedule = build_schedule(cfg.model, BatchSpec(cfg.batch.tokens, n),
                                     rs.strategy, rs.reuse, scope);
  Trace trace = simulate(schedule, cfg.hardware);
  MemoryProfile memory = measure_memory(schedule, trace);
  Validity validity = check_trace(schedule, trace);
  return SimulationRun{std::move(schedule), std::move(trace),
                       std::move(memory), std::move(validity), rs};
}

ojson simulate_json(const ExperimentConfig& cfg, const SimulationRun& run) {
  const BatchSpec& batch = run.schedule.batch();
  const int eb = cfg.model.element_bytes();
  const MemoryProfile& m = run.memory;
  ojson j;
  j["report"] = kSimulateReport;
  j["model"] = model_json(cfg.model, cfg.preset);
  j["tokens"] = batch.tokens();
  j["partitions"] = batch.partitions();
  j["micro_batch"] = batch.micro_batch();
  j["strategy"] = std::string(run.strategy.strategy.name());
  j["reuse"] = run.strategy.reuse;
  j["scope"] = std::string(scope_name(run.schedule.scope()));
  j["ops"] = run.schedule.size();
  j["makespan_us"] = duration_json(run.trace.makespan());
  ojson busy;
  for (StreamKind k : kAllStreams) {
    busy[std::string(stream_name(k))] = duration_json(run.trace.busy_time(k));
  }
  j["busy_us"] = std::move(busy);
  j["memory"] = ojson{
      {"model_states", amount_json(m.model_states, eb)},
      {"peak_activations", amount_json(m.peak_activations, eb)},
      {"peak_buffers", amount_json(m.peak_buffers, eb)},
      {"peak_combined", amount_json(m.peak_combined, eb)},
      {"peak_host", amount_json(m.peak_host, eb)},
      {"total", amount_json(m.report().total, eb)}};
  j["valid"] = run.validity.ok();
  return j;
}

std::string run_search(const ExperimentConfig& cfg) {
  WorkloadSpec workload;
  if (cfg.batch.workload) {
    workload = *cfg.batch.workload;
  } else {
    workload.seed = cfg.seed;
    workload.iterations = 1000;
  }
  const std::vector<Count> batches = generate_workload(workload);
  const ReuseStrategy strategy = search_strategy(cfg);
  AdaptiveGranularity ctx(cfg.model, cfg.hardware, strategy, budget_from(cfg));

  std::map<std::pair<Count, Count>, double> makespans;
  std::ostringstream os;
  Count iter = 0;
  for (Count tokens : batches) {
    const GranularityDecision d = ctx.decide(tokens);
    auto [it, fresh] = makespans.try_emplace({tokens, d.partitions}, 0.0);
    if (fresh) {
      it->second = simulate_step_makespan(
          TrialRequest{&cfg.model, &cfg.hardware, strategy, tokens,
                       d.partitions});
    }
    ojson line;
    line["report"] = kSearchIteration;
    line["iter"] = iter++;
    line["B"] = tokens;
    line["n"] = d.partitions;
    line["trials_run"] = d.trials;
    line["makespan_us"] = duration_json(it->second);
    line["cache_hit"] = d.cache_hit;
    line["range_hit"] = d.range_hit;
    line["searched"] = d.searched;
    os << line.dump() << "\n";
  }
  ojson summary;
  summary["report"] = kSearchSummary;
  summary["iterations"] = ctx.calls();
  summary["searches"] = ctx.searches();
  summary["total_trials"] = ctx.total_trials();
  summary["cache_hits"] = ctx.cache_hits();
  summary["cache_hit_rate"] =
      ctx.calls() == 0 ? 0.0
                       : static_cast<double>(ctx.cache_hits()) /
                             static_cast<double>(ctx.calls());
  summary["range_hits"] = ctx.range_hits();
  summary["conflicts"] = ctx.index().conflicts();
  ojson ranges = ojson::array();
  for (const GranularityRange& r : ctx.index().ranges()) {
    ranges.push_back(
        ojson{{"lower", r.lower}, {"upper", r.upper}, {"n", r.partitions}});
  }
  summary["ranges"] = std::move(ranges);
  os << summary.dump() << "\n";
  return os.str();
}

namespace {

struct SweepCell {
  std::string strategy;
  Count tokens;
  Count partitions;
};

std::vector<std::string> sweep_row(const ExperimentConfig& base,
                                   const SweepCell& cell) {
  const ModelSpec& m = base.model;
  std::vector<std::string> row = {
      base.preset,
      std::to_string(m.model_dim()),
      std::to_string(m.hidden_dim()),
      std::to_string(m.num_experts()),
      std::to_string(m.num_nodes()),
      std::to_string(cell.tokens),
      std::to_string(cell.partitions)};
  const std::size_t blanks = sweep_columns().size() - row.size() - 4;
  auto fail = [&](ErrorCode code, const std::string& reuse) {
    row.push_back("");
    row.push_back(cell.strategy);
    row.push_back(reuse);
    row.push_back(std::string(error_code_name(code)));
    row.resize(row.size() + blanks);
    return row;
  };
  ExperimentConfig cfg = base;
  cfg.batch.tokens = cell.tokens;
  cfg.pipeline.adaptive = false;
  cfg.pipeline.partitions = cell.partitions;
  cfg.strategy = StrategySetting::parse(cell.strategy);
  const std::string reuse = cfg.strategy.reuses() ? "true" : "false";
  if (cell.partitions > cell.tokens) {
    return fail(ErrorCode::kInvalidPartitioning, reuse);
  }
  if (cfg.strategy.reuses() && cell.partitions < 2) {
    return fail(ErrorCode::kReuseNotApplicable, reuse);
  }
  const ResolvedStrategy rs = resolve_strategy(cfg, cell.partitions);
  const Schedule s = build_schedule(m, BatchSpec(cell.tokens, cell.partitions),
                                    rs.strategy, rs.reuse, ScheduleScope::kStep);
  const Trace t = simulate(s, cfg.hardware);
  const MemoryReport mem = measure_memory(s, t).report();
  double forward_end = 0.0;
  for (const OpEvent& e : t.events()) {
    if (s.op(e.op).direction == Direction::kForward) {
      forward_end = std::max(forward_end, e.end);
    }
  }
  auto us = [](double seconds) { return std::to_string(to_microseconds(seconds)); };
  row.push_back(std::to_string(micro_batch_size(cell.tokens, cell.partitions)));
  row.push_back(std::string(rs.strategy.name()));
  row.push_back(reuse);
  row.push_back("ok");
  row.push_back(us(t.makespan()));
  row.push_back(us(forward_end));
  row.push_back(us(t.makespan() - forward_end));
  for (StreamKind k : kAllStreams) row.push_back(us(t.busy_time(k)));
  row.push_back(std::to_string(mem.activations));
  row.push_back(std::to_string(mem.buffers));
  row.push_back(std::to_string(mem.total));
  row.push_back(std::to_string(mem.total_bytes()));
  return row;
}

}  // namespace

std::string run_sweep(const ExperimentConfig& cfg, unsigned threads) {
  std::vector<SweepCell> cells;
  for (const std::string& strategy : cfg.sweep.strategies) {
    for (Count tokens : cfg.sweep.batches) {
      for (Count n : cfg.sweep.partitions) cells.push_back({strategy, tokens, n});
    }
  }
  std::vector<std::vector<std::string>> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        rows[i] = sweep_row(cfg, cells[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const unsigned count = std::max(
      1u, std::min<unsigned>(threads, static_cast<unsigned>(cells.size())));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < count; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::ostringstream os;
  auto emit = [&os](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os << ',';
      os << fields[i];
    }
    os << '\n';
  };
  emit(sweep_columns());
  for (const auto& row : rows) emit(row);
  return os.str();
}

namespace {

struct Flags {
  std::string preset, config, n, strategy, out, trace_format, trace_out;
  std::string scope = "step", format;
  Count batch = 0;
  bool reuse = false;
  std::uint64_t seed = 0;
  Count iterations = 0, min_batch = 0, max_batch = 0, batch_step = 0;
  std::string distribution;
  double noise = 0.0;
  int trials = 1;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  std::vector<Count> n_values, batch_values;
  std::vector<std::string> strategies;
};

struct Options {
  CLI::Option *preset, *config, *batch, *n, *strategy, *reuse, *seed, *out;
  CLI::Option *trace_format = nullptr, *trace_out = nullptr;
  CLI::Option *format = nullptr;
  CLI::Option *iterations = nullptr, *min_batch = nullptr,
              *max_batch = nullptr, *batch_step = nullptr,
              *distribution = nullptr, *noise = nullptr, *trials = nullptr;
  CLI::Option *n_values = nullptr, *batch_values = nullptr,
              *strategies = nullptr;
};

bool given(const CLI::Option* o) { return o != nullptr && o->count() > 0; }

Options add_common(CLI::App* sub, Flags& f) {
  Options o{};
  o.preset = sub->add_option("--preset", f.preset,
                             "Model preset (moe-gpt3-s, moe-gpt3-xl, moe-bert-l)");
  o.config = sub->add_option("--config", f.config, "JSON configuration file");
  o.batch = sub->add_option("--batch", f.batch, "Tokens per batch (B)");
  o.n = sub->add_option("--n", f.n, "Partition count, or 'adaptive'");
  o.strategy = sub->add_option("--strategy", f.strategy,
                               "Reuse strategy: none, auto, S1, S2, S3, S4");
  o.reuse = sub->add_flag("--reuse", f.reuse, "Enable memory reuse");
  o.seed = sub->add_option("--seed", f.seed, "Random seed");
  o.out = sub->add_option("--out", f.out, "Output path (default stdout)");
  return o;
}

ExperimentConfig build_config(const Flags& f, const Options& o) {
  ExperimentConfig cfg;
  if (given(o.config)) cfg = load_config(f.config);
  if (given(o.preset)) {
    ModelSpec p = [&] {
      try {
        return model_preset(f.preset, cfg.model.num_nodes());
      } catch (const Error& e) {
        throw Error(ErrorCode::kConfig, std::string("--preset: ") + e.what());
      }
    }();
    cfg.model = ModelSpec(p.model_dim(), p.hidden_dim(), p.num_experts(),
                          p.num_nodes(), cfg.model.element_bytes());
    cfg.preset = f.preset;
  }
  if (given(o.batch)) cfg.batch.tokens = f.batch;
  if (given(o.n)) {
    if (f.n == "adaptive") {
      cfg.pipeline.adaptive = true;
    } else {
      std::size_t used = 0;
      Count n = 0;
      try {
        n = std::stoll(f.n, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != f.n.size() || n < 1) {
        throw Error(ErrorCode::kUsage,
                    "--n expects a positive integer or 'adaptive', got '" +
                        f.n + "'");
      }
      cfg.pipeline.adaptive = false;
      cfg.pipeline.partitions = n;
    }
  }
  if (given(o.strategy)) {
    try {
      cfg.strategy = StrategySetting::parse(f.strategy);
    } catch (const Error& e) {
      throw Error(ErrorCode::kUsage, std::string("--strategy: ") + e.what());
    }
  }
  if (f.reuse) {
    if (given(o.strategy) && !cfg.strategy.reuses()) {
      throw Error(ErrorCode::kUsage,
                  "conflicting flags: --reuse with --strategy none");
    }
    if (!cfg.strategy.reuses()) cfg.strategy.mode = StrategyMode::kAuto;
  }
  if (given(o.seed)) {
    cfg.seed = f.seed;
    if (cfg.batch.workload) cfg.batch.workload->seed = f.seed;
  }
  if (given(o.out)) cfg.output.path = f.out;
  if (given(o.trace_out)) cfg.output.trace_path = f.trace_out;
  if (given(o.trace_format)) {
    try {
      cfg.output.trace_format = parse_trace_format(f.trace_format);
    } catch (const Error& e) {
      throw Error(ErrorCode::kUsage, std::string("--trace-format: ") + e.what());
    }
    if (cfg.output.trace_path.empty()) {
      throw Error(ErrorCode::kUsage,
                  "conflicting flags: --trace-format without --trace-out");
    }
  }
  if (given(o.format)) cfg.output.format = f.format;
  const bool workload_flag = given(o.iterations) || given(o.min_batch) ||
                             given(o.max_batch) || given(o.batch_step) ||
                             given(o.distribution);
  if (workload_flag) {
    WorkloadSpec w = cfg.batch.workload.value_or(WorkloadSpec{});
    if (!cfg.batch.workload) {
      w.seed = cfg.seed;
      w.iterations = 1000;
    }
    if (given(o.iterations)) w.iterations = f.iterations;
    if (given(o.min_batch)) w.min_tokens = f.min_batch;
    if (given(o.max_batch)) w.max_tokens = f.max_batch;
    if (given(o.batch_step)) w.step = f.batch_step;
    if (given(o.distribution)) {
      w.distribution = f.distribution == "zipf" ? WorkloadDistribution::kZipf
                                                : WorkloadDistribution::kUniform;
    }
    cfg.batch.workload = w;
  }
  if (given(o.noise)) cfg.pipeline.noise = f.noise;
  if (given(o.trials)) cfg.pipeline.trials = f.trials;
  if (given(o.n_values)) cfg.sweep.partitions = f.n_values;
  if (given(o.batch_values)) cfg.sweep.batches = f.batch_values;
  if (given(o.strategies)) cfg.sweep.strategies = f.strategies;
  cfg.validate();
  return cfg;
}

void write_error(std::ostream& err, std::string_view code,
                 const std::string& message) {
  err << ojson{{"error", {{"code", code}, {"message", message}}}}.dump()
      << "\n";
}

const std::vector<std::string> kSubcommands = {"memory", "plan", "simulate",
                                               "search", "sweep"};

}  // namespace

int run_subcommand(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  CLI::App app{"Discrete-event simulator and planner for pipelined MoE layers",
               "moesim"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  Flags f;

  CLI::App* memory = app.add_subcommand("memory", "Memory footprint report");
  Options memory_opts = add_common(memory, f);
  memory_opts.format = memory->add_option("--format", f.format, "json or table")
                           ->check(CLI::IsMember({"json", "table"}));

  CLI::App* plan = app.add_subcommand("plan", "Cost-model strategy selection");
  Options plan_opts = add_common(plan, f);

  CLI::App* sim = app.add_subcommand("simulate", "Simulate one step");
  Options sim_opts = add_common(sim, f);
  sim_opts.trace_out =
      sim->add_option("--trace-out", f.trace_out, "Write the trace here");
  sim_opts.trace_format = sim->add_option("--trace-format", f.trace_format,
                                          "jsonl or trace-event");
  sim->add_option("--scope", f.scope, "forward, backward or step")
      ->check(CLI::IsMember({"forward", "backward", "step"}));

  CLI::App* search = app.add_subcommand("search", "Adaptive granularity run");
  Options search_opts = add_common(search, f);
  search_opts.iterations =
      search->add_option("--iterations", f.iterations, "Workload length")
          ->check(CLI::PositiveNumber);
  search_opts.min_batch =
      search->add_option("--min-batch", f.min_batch, "Smallest workload batch");
  search_opts.max_batch =
      search->add_option("--max-batch", f.max_batch, "Largest workload batch");
  search_opts.batch_step = search->add_option("--batch-step", f.batch_step,
                                              "Workload batch grid step");
  search_opts.distribution =
      search->add_option("--distribution", f.distribution, "uniform or zipf")
          ->check(CLI::IsMember({"uniform", "zipf"}));
  search_opts.noise = search->add_option(
      "--noise", f.noise, "Relative sigma of measurement noise");
  search_opts.trials = search->add_option("--trials", f.trials,
                                          "Trials per candidate")
                           ->check(CLI::PositiveNumber);

  CLI::App* sweep = app.add_subcommand("sweep", "Grid over n, B and strategy");
  Options sweep_opts = add_common(sweep, f);
  sweep_opts.n_values =
      sweep->add_option("--n-values", f.n_values, "Partition counts")
          ->delimiter(',');
  sweep_opts.batch_values =
      sweep->add_option("--batch-values", f.batch_values, "Batch sizes")
          ->delimiter(',');
  sweep_opts.strategies =
      sweep->add_option("--strategies", f.strategies, "Strategies")
          ->delimiter(',');
  sweep->add_option("--threads", f.threads, "Worker threads")
      ->check(CLI::PositiveNumber);

  try {
    if (!args.empty() && !args.front().empty() && args.front()[0] != '-' &&
        std::find(kSubcommands.begin(), kSubcommands.end(), args.front()) ==
            kSubcommands.end()) {
      throw Error(ErrorCode::kUsage, "unknown subcommand '" + args.front() +
                                         "'; expected one of memory, plan, "
                                         "simulate, search, sweep");
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);

    if (memory->parsed()) {
      ExperimentConfig cfg = build_config(f, memory_opts);
      const MemorySummary s = summarize_memory(cfg);
      const std::string text = cfg.output.format == "table"
                                   ? memory_table(cfg, s)
                                   : memory_json(cfg, s).dump(2) + "\n";
      write_output(text, cfg.output.path, out);
    } else if (plan->parsed()) {
      ExperimentConfig cfg = build_config(f, plan_opts);
      write_output(plan_json(cfg).dump(2) + "\n", cfg.output.path, out);
    } else if (sim->parsed()) {
      ExperimentConfig cfg = build_config(f, sim_opts);
      const ScheduleScope scope = f.scope == "forward"  ? ScheduleScope::kForward
                                  : f.scope == "backward" ? ScheduleScope::kBackward
                                                          : ScheduleScope::kStep;
      const SimulationRun run = run_simulation(cfg, scope);
      if (!cfg.output.trace_path.empty()) {
        std::ostringstream trace;
        if (cfg.output.trace_format == TraceFormat::kJsonl) {
          write_trace_jsonl(trace, run.schedule, run.trace);
        } else {
          write_trace_events(trace, run.schedule, run.trace);
        }
        write_output(trace.str(), cfg.output.trace_path, out);
      }
      write_output(simulate_json(cfg, run).dump(2) + "\n", cfg.output.path,
                   out);
    } else if (search->parsed()) {
      ExperimentConfig cfg = build_config(f, search_opts);
      write_output(run_search(cfg), cfg.output.path, out);
    } else if (sweep->parsed()) {
      ExperimentConfig cfg = build_config(f, sweep_opts);
      if (given(sweep_opts.n)) {
        if (cfg.pipeline.adaptive) {
          throw Error(ErrorCode::kUsage, "sweep needs fixed partition counts");
        }
        cfg.sweep.partitions = {cfg.pipeline.partitions};
      }
      if (given(sweep_opts.batch)) cfg.sweep.batches = {cfg.batch.tokens};
      if (given(sweep_opts.strategy) || f.reuse) {
        if (given(sweep_opts.strategies)) {
          throw Error(ErrorCode::kUsage,
                      "conflicting flags: --strategy/--reuse with --strategies");
        }
        cfg.sweep.strategies = {cfg.strategy.name()};
      }
      write_output(run_sweep(cfg, f.threads), cfg.output.path, out);
    }
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::ostringstream help;
      app.exit(e, help, help);
      out << help.str();
      return 0;
    }
    write_error(err, "usage", e.what());
    return 2;
  } catch (const Error& e) {
    write_error(err, error_code_name(e.code()), e.what());
    return e.code() == ErrorCode::kUsage ? 2 : 1;
  } catch (const std::exception& e) {
    write_error(err, "internal", e.what());
    return 1;
  }
}

int run_subcommand(int argc, const char* const* argv, std::ostream& out,
                   std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_subcommand(args, out, err);
}

}  // namespace moesim
