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

#include "moesim/config.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace moesim {

using nlohmann::json;

TraceFormat parse_trace_format(std::string_view name) {
  if (name == "jsonl") return TraceFormat::kJsonl;
  if (name == "trace-event") return TraceFormat::kTraceEvent;
  throw Error(ErrorCode::kConfig,
              "trace format must be 'jsonl' or 'trace-event', got '" +
                  std::string(name) + "'");
}

StrategySetting StrategySetting::parse(std::string_view name) {
  StrategySetting s;
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (lower == "none") return s;
  if (lower == "auto") {
    s.mode = StrategyMode::kAuto;
    return s;
  }
  s.mode = StrategyMode::kExplicit;
  s.explicit_strategy = ReuseStrategy::parse(name);
  return s;
}

std::string StrategySetting::name() const {
  switch (mode) {
    case StrategyMode::kNone: return "none";
    case StrategyMode::kAuto: return "auto";
    case StrategyMode::kExplicit:
      return std::string(explicit_strategy.name());
  }
  return "none";
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::kConfig, path + ": " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void only_keys(const json& obj, const std::string& path,
               std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path, "expected an object");
  for (const auto& [key, value] : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) fail(join(path, key), "unknown key");
  }
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

double positive(const json& v, const std::string& path) {
  const double d = number(v, path);
  if (!(d > 0.0) || !std::isfinite(d)) fail(path, "must be > 0");
  return d;
}

Count integer(const json& v, const std::string& path, Count min_value) {
  if (!v.is_number_integer()) fail(path, "expected an integer");
  const Count c = v.get<Count>();
  if (c < min_value) {
    fail(path, "must be >= " + std::to_string(min_value));
  }
  return c;
}

std::string string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<Count> integer_list(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty()) fail(path, "expected a nonempty array");
  std::vector<Count> out;
  for (size_t i = 0; i < v.size(); ++i) {
    out.push_back(integer(v[i], path + "[" + std::to_string(i) + "]", 1));
  }
  return out;
}

StreamKind stream_kind(const std::string& name, const std::string& path) {
  if (name == "compute") return StreamKind::kCompute;
  if (name == "collective") return StreamKind::kCollective;
  if (name == "copy") return StreamKind::kCopy;
  fail(path, "expected one of compute, collective, copy");
}

// "collective+copy" -> {collective, copy}
KindSet kind_set(const std::string& spec, const std::string& path) {
  KindSet set;
  std::stringstream ss(spec);
  std::string part;
  while (std::getline(ss, part, '+')) set = set.with(stream_kind(part, path));
  return set;
}

void apply_model(ExperimentConfig& cfg, const json& m, const std::string& p) {
  only_keys(m, p,
            {"preset", "model_dim", "hidden_dim", "num_experts", "num_nodes",
             "element_bytes"});
  Count nodes = cfg.model.num_nodes();
  if (m.contains("num_nodes")) nodes = integer(m["num_nodes"], join(p, "num_nodes"), 1);
  Count md = cfg.model.model_dim(), hd = cfg.model.hidden_dim(),
        ne = cfg.model.num_experts();
  int eb = cfg.model.element_bytes();
  if (m.contains("preset")) {
    const std::string name = string(m["preset"], join(p, "preset"));
    try {
      const ModelSpec preset = model_preset(name, 1);
      md = preset.model_dim();
      hd = preset.hidden_dim();
      ne = preset.num_experts();
    } catch (const Error& e) {
      fail(join(p, "preset"), e.what());
    }
    cfg.preset = name;
  }
  auto field = [&](const char* key, Count& target) {
    if (m.contains(key)) {
      target = integer(m[key], join(p, key), 1);
      cfg.preset.clear();
    }
  };
  field("model_dim", md);
  field("hidden_dim", hd);
  field("num_experts", ne);
  if (m.contains("element_bytes")) {
    eb = static_cast<int>(integer(m["element_bytes"], join(p, "element_bytes"), 1));
  }
  try {
    cfg.model = ModelSpec(md, hd, ne, nodes, eb);
  } catch (const Error& e) {
    fail(p, e.what());
  }
}

void apply_hardware(HardwareProfile& hw, const json& h, const std::string& p) {
  only_keys(h, p,
            {"w_comp", "w_comm", "w_mem", "launch_overhead",
             "compute_saturation", "slowdown"});
  if (h.contains("w_comp")) hw.w_comp = positive(h["w_comp"], join(p, "w_comp"));
  if (h.contains("w_comm")) hw.w_comm = positive(h["w_comm"], join(p, "w_comm"));
  if (h.contains("w_mem")) hw.w_mem = positive(h["w_mem"], join(p, "w_mem"));
  if (h.contains("compute_saturation")) {
    const std::string q = join(p, "compute_saturation");
    hw.compute_saturation = number(h["compute_saturation"], q);
    if (!(hw.compute_saturation >= 1.0)) fail(q, "must be >= 1");
  }
  if (h.contains("launch_overhead")) {
    const json& lo = h["launch_overhead"];
    const std::string q = join(p, "launch_overhead");
    auto seconds = [&](const json& v, const std::string& path) {
      const double d = number(v, path);
      if (!(d >= 0.0) || !std::isfinite(d)) fail(path, "must be >= 0");
      return d;
    };
    if (lo.is_object()) {
      only_keys(lo, q, {"compute", "collective", "copy"});
      for (const auto& [key, value] : lo.items()) {
        hw.launch_overhead[static_cast<int>(stream_kind(key, join(q, key)))] =
            seconds(value, join(q, key));
      }
    } else {
      hw.set_launch_overhead(seconds(lo, q));
    }
  }
  if (h.contains("slowdown")) {
    const json& sd = h["slowdown"];
    const std::string q = join(p, "slowdown");
    only_keys(sd, q, {"compute", "collective", "copy"});
    for (const auto& [kind_name, row] : sd.items()) {
      const std::string rq = join(q, kind_name);
      const StreamKind kind = stream_kind(kind_name, rq);
      if (!row.is_object()) fail(rq, "expected an object");
      for (const auto& [others, value] : row.items()) {
        const std::string vq = join(rq, others);
        const KindSet set = kind_set(others, vq);
        if (set.empty() || set.contains(kind)) {
          fail(vq, "must name other stream kinds joined by '+'");
        }
        const double f = number(value, vq);
        if (!(f > 0.0 && f <= 1.0)) fail(vq, "must be in (0, 1]");
        hw.slowdown.set(kind, set, f);
      }
    }
  }
}

WorkloadSpec parse_workload(const json& w, const std::string& p,
                            WorkloadSpec spec) {
  only_keys(w, p,
            {"seed", "iterations", "min", "max", "step", "distribution",
             "exponent"});
  if (w.contains("seed")) {
    spec.seed = static_cast<std::uint64_t>(integer(w["seed"], join(p, "seed"), 0));
  }
  if (w.contains("iterations")) {
    spec.iterations = integer(w["iterations"], join(p, "iterations"), 1);
  }
  if (w.contains("min")) spec.min_tokens = integer(w["min"], join(p, "min"), 1);
  if (w.contains("max")) spec.max_tokens = integer(w["max"], join(p, "max"), 1);
  if (w.contains("step")) spec.step = integer(w["step"], join(p, "step"), 1);
  if (w.contains("distribution")) {
    const std::string d = string(w["distribution"], join(p, "distribution"));
    if (d == "uniform") {
      spec.distribution = WorkloadDistribution::kUniform;
    } else if (d == "zipf") {
      spec.distribution = WorkloadDistribution::kZipf;
    } else {
      fail(join(p, "distribution"), "expected 'uniform' or 'zipf'");
    }
  }
  if (w.contains("exponent")) {
    spec.exponent = positive(w["exponent"], join(p, "exponent"));
  }
  if (spec.min_tokens > spec.max_tokens) fail(p, "min must not exceed max");
  return spec;
}

}  // namespace

void apply_config(ExperimentConfig& cfg, const json& doc) {
  only_keys(doc, "",
            {"model", "hardware", "batch", "pipeline", "strategy", "reuse",
             "seed", "sweep", "output"});
  if (doc.contains("model")) apply_model(cfg, doc["model"], "model");
  if (doc.contains("hardware")) {
    apply_hardware(cfg.hardware, doc["hardware"], "hardware");
  }
  if (doc.contains("batch")) {
    const json& b = doc["batch"];
    only_keys(b, "batch", {"tokens", "workload"});
    if (b.contains("tokens")) {
      cfg.batch.tokens = integer(b["tokens"], "batch.tokens", 1);
    }
    if (b.contains("workload")) {
      cfg.batch.workload = parse_workload(b["workload"], "batch.workload",
                                          cfg.batch.workload.value_or(WorkloadSpec{}));
    }
  }
  if (doc.contains("pipeline")) {
    const json& pl = doc["pipeline"];
    only_keys(pl, "pipeline",
              {"partitions", "candidates", "trials", "min_micro_batch", "noise"});
    if (pl.contains("partitions")) {
      const json& n = pl["partitions"];
      if (n.is_string()) {
        if (n.get<std::string>() != "adaptive") {
          fail("pipeline.partitions", "expected an integer or \"adaptive\"");
        }
        cfg.pipeline.adaptive = true;
      } else {
        cfg.pipeline.adaptive = false;
        cfg.pipeline.partitions = integer(n, "pipeline.partitions", 1);
      }
    }
    if (pl.contains("candidates")) {
      cfg.pipeline.candidates =
          integer_list(pl["candidates"], "pipeline.candidates");
    }
    if (pl.contains("trials")) {
      cfg.pipeline.trials =
          static_cast<int>(integer(pl["trials"], "pipeline.trials", 1));
    }
    if (pl.contains("min_micro_batch")) {
      cfg.pipeline.min_micro_batch =
          integer(pl["min_micro_batch"], "pipeline.min_micro_batch", 1);
    }
    if (pl.contains("noise")) {
      const double s = number(pl["noise"], "pipeline.noise");
      if (!(s >= 0.0)) fail("pipeline.noise", "must be >= 0");
      cfg.pipeline.noise = s;
    }
  }
  if (doc.contains("strategy")) {
    try {
      cfg.strategy = StrategySetting::parse(string(doc["strategy"], "strategy"));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfig) throw;
      fail("strategy", e.what());
    }
  }
  if (doc.contains("reuse")) {
    if (!doc["reuse"].is_boolean()) fail("reuse", "expected a boolean");
    const bool reuse = doc["reuse"].get<bool>();
    if (reuse && cfg.strategy.mode == StrategyMode::kNone) {
      cfg.strategy.mode = StrategyMode::kAuto;
    } else if (!reuse && cfg.strategy.reuses()) {
      fail("reuse", "false conflicts with strategy " + cfg.strategy.name());
    }
  }
  if (doc.contains("seed")) {
    cfg.seed = static_cast<std::uint64_t>(integer(doc["seed"], "seed", 0));
  }
  if (doc.contains("sweep")) {
    const json& s = doc["sweep"];
    only_keys(s, "sweep", {"partitions", "batches", "strategies"});
    if (s.contains("partitions")) {
      cfg.sweep.partitions = integer_list(s["partitions"], "sweep.partitions");
    }
    if (s.contains("batches")) {
      cfg.sweep.batches = integer_list(s["batches"], "sweep.batches");
    }
    if (s.contains("strategies")) {
      const json& list = s["strategies"];
      if (!list.is_array() || list.empty()) {
        fail("sweep.strategies", "expected a nonempty array");
      }
      cfg.sweep.strategies.clear();
      for (size_t i = 0; i < list.size(); ++i) {
        const std::string path = "sweep.strategies[" + std::to_string(i) + "]";
        const std::string name = string(list[i], path);
        try {
          StrategySetting::parse(name);
        } catch (const Error& e) {
          fail(path, e.what());
        }
        cfg.sweep.strategies.push_back(name);
      }
    }
  }
  if (doc.contains("output")) {
    const json& o = doc["output"];
    only_keys(o, "output", {"path", "trace_path", "trace_format", "format"});
    if (o.contains("path")) cfg.output.path = string(o["path"], "output.path");
    if (o.contains("trace_path")) {
      cfg.output.trace_path = string(o["trace_path"], "output.trace_path");
    }
    if (o.contains("trace_format")) {
      try {
        cfg.output.trace_format =
            parse_trace_format(string(o["trace_format"], "output.trace_format"));
      } catch (const Error& e) {
        fail("output.trace_format", e.what());
      }
    }
    if (o.contains("format")) {
      const std::string f = string(o["format"], "output.format");
      if (f != "json" && f != "table") {
        fail("output.format", "expected 'json' or 'table'");
      }
      cfg.output.format = f;
    }
  }
  cfg.validate();
}

void ExperimentConfig::validate() const {
  try {
    hardware.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string("hardware: ") + e.what());
  }
  if (batch.tokens < 1) fail("batch.tokens", "must be >= 1");
  if (!pipeline.adaptive && pipeline.partitions > batch.tokens) {
    throw Error(ErrorCode::kInvalidPartitioning,
                "pipeline.partitions: " + std::to_string(pipeline.partitions) +
                    " exceeds batch.tokens " + std::to_string(batch.tokens));
  }
  for (size_t i = 1; i < pipeline.candidates.size(); ++i) {
    if (pipeline.candidates[i] <= pipeline.candidates[i - 1]) {
      fail("pipeline.candidates", "must be strictly ascending");
    }
  }
}

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset -> line/column (1-based).
    const size_t offset = std::min<size_t>(e.byte == 0 ? 0 : e.byte - 1,
                                           text.size());
    size_t line = 1, column = 1;
    for (size_t i = 0; i < offset; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    const auto colon = what.find("syntax error");
    throw Error(ErrorCode::kParse,
                std::string(source) + ":" + std::to_string(line) + ":" +
                    std::to_string(column) + ": " +
                    (colon == std::string::npos ? what : what.substr(colon)));
  }
  ExperimentConfig cfg;
  apply_config(cfg, doc);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

nlohmann::ordered_json hardware_to_json(const HardwareProfile& hw) {
  nlohmann::ordered_json j;
  j["w_comp"] = hw.w_comp;
  j["w_comm"] = hw.w_comm;
  j["w_mem"] = hw.w_mem;
  j["launch_overhead"] = {
      {"compute", hw.launch(StreamKind::kCompute)},
      {"collective", hw.launch(StreamKind::kCollective)},
      {"copy", hw.launch(StreamKind::kCopy)}};
  j["compute_saturation"] = hw.compute_saturation;
  nlohmann::ordered_json sd;
  for (StreamKind k : kAllStreams) {
    nlohmann::ordered_json row;
    for (unsigned bits = 1; bits < 8; ++bits) {
      const KindSet set = KindSet::from_bits(bits);
      if (set.contains(k)) continue;
      std::string key;
      for (StreamKind o : kAllStreams) {
        if (!set.contains(o)) continue;
        if (!key.empty()) key += "+";
        key += stream_name(o);
      }
      row[key] = hw.slowdown.factor(k, set);
    }
    sd[std::string(stream_name(k))] = std::move(row);
  }
  j["slowdown"] = std::move(sd);
  return j;
}

}  // namespace moesim
