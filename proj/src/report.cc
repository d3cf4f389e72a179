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

#include "moesim/report.h"

#include <functional>

#include "moesim/trace_export.h"

namespace moesim {

using nlohmann::json;

ojson amount_json(Count elements, int element_bytes) {
  return ojson{{"elements", elements}, {"bytes", elements * element_bytes}};
}

ojson memory_report_json(const MemoryReport& r) {
  return ojson{{"model_states", amount_json(r.model_states, r.element_bytes)},
               {"activations", amount_json(r.activations, r.element_bytes)},
               {"buffers", amount_json(r.buffers, r.element_bytes)},
               {"total", amount_json(r.total, r.element_bytes)}};
}

ojson model_json(const ModelSpec& spec, std::string_view preset) {
  ojson j;
  j["preset"] = preset.empty() ? ojson(nullptr) : ojson(std::string(preset));
  j["model_dim"] = spec.model_dim();
  j["hidden_dim"] = spec.hidden_dim();
  j["num_experts"] = spec.num_experts();
  j["num_nodes"] = spec.num_nodes();
  j["element_bytes"] = spec.element_bytes();
  return j;
}

ojson duration_json(double seconds) { return to_microseconds(seconds); }

namespace {

enum class Type { kInt, kNumber, kString, kBool, kObject, kArray, kAmount,
                  kMemory, kModel, kBreakdown };

struct Field {
  const char* key;
  Type type;
  bool nullable = false;
};

class Checker {
 public:
  std::string error;

  bool check(const json& obj, const std::string& path,
             std::initializer_list<Field> fields) {
    if (!obj.is_object()) return fail(path, "expected an object");
    for (const Field& f : fields) {
      const std::string p = path + "/" + f.key;
      if (!obj.contains(f.key)) return fail(p, "missing");
      const json& v = obj[f.key];
      if (v.is_null()) {
        if (f.nullable) continue;
        return fail(p, "must not be null");
      }
      if (!check_type(v, p, f.type)) return false;
    }
    return true;
  }

  bool check_type(const json& v, const std::string& p, Type t) {
    switch (t) {
      case Type::kInt:
        return v.is_number_integer() || fail(p, "expected an integer");
      case Type::kNumber:
        return v.is_number() || fail(p, "expected a number");
      case Type::kString:
        return v.is_string() || fail(p, "expected a string");
      case Type::kBool:
        return v.is_boolean() || fail(p, "expected a boolean");
      case Type::kObject:
        return v.is_object() || fail(p, "expected an object");
      case Type::kArray:
        return v.is_array() || fail(p, "expected an array");
      case Type::kAmount:
        return check(v, p, {{"elements", Type::kInt}, {"bytes", Type::kInt}});
      case Type::kMemory:
        return check(v, p,
                     {{"model_states", Type::kAmount},
                      {"activations", Type::kAmount},
                      {"buffers", Type::kAmount},
                      {"total", Type::kAmount}});
      case Type::kModel:
        return check(v, p,
                     {{"preset", Type::kString, true},
                      {"model_dim", Type::kInt},
                      {"hidden_dim", Type::kInt},
                      {"num_experts", Type::kInt},
                      {"num_nodes", Type::kInt},
                      {"element_bytes", Type::kInt}});
      case Type::kBreakdown:
        return check(v, p,
                     {{"t_comp_us", Type::kInt},
                      {"t_comm_us", Type::kInt},
                      {"t_mem_us", Type::kInt},
                      {"c_total_us", Type::kInt}});
    }
    return true;
  }

  bool fail(const std::string& path, const std::string& what) {
    if (error.empty()) error = (path.empty() ? "/" : path) + ": " + what;
    return false;
  }
};

bool check_strategy_cost(Checker& c, const json& v, const std::string& p) {
  return c.check(v, p,
                 {{"strategy", Type::kString},
                  {"sigma", Type::kNumber},
                  {"mu", Type::kNumber},
                  {"eta", Type::kNumber},
                  {"forward", Type::kBreakdown},
                  {"backward", Type::kBreakdown},
                  {"total_us", Type::kInt}});
}

}  // namespace

std::string schema_error(const json& doc) {
  Checker c;
  if (!c.check(doc, "", {{"report", Type::kString}})) return c.error;
  const std::string kind = doc["report"].get<std::string>();
  if (kind == kMemoryReport) {
    if (!c.check(doc, "",
                 {{"model", Type::kModel},
                  {"tokens", Type::kInt},
                  {"partitions", Type::kInt},
                  {"strategy", Type::kString},
                  {"reuse", Type::kBool},
                  {"baseline", Type::kMemory},
                  {"pipeline", Type::kMemory, true},
                  {"reused", Type::kMemory, true},
                  {"savings_per_category", Type::kAmount, true},
                  {"saving_ratio", Type::kNumber, true},
                  {"simulated", Type::kObject}})) {
      return c.error;
    }
    c.check(doc["simulated"], "/simulated",
            {{"strategy", Type::kString},
             {"no_reuse", Type::kMemory},
             {"reused", Type::kMemory, true},
             {"saving_ratio", Type::kNumber, true}});
  } else if (kind == kPlanReport) {
    if (!c.check(doc, "",
                 {{"model", Type::kModel},
                  {"tokens", Type::kInt},
                  {"partitions", Type::kInt},
                  {"micro_batch", Type::kInt},
                  {"alpha", Type::kNumber},
                  {"beta", Type::kNumber},
                  {"strategies", Type::kArray},
                  {"no_reuse", Type::kObject},
                  {"chosen", Type::kString}})) {
      return c.error;
    }
    const json& list = doc["strategies"];
    if (list.size() != 4) c.fail("/strategies", "expected 4 entries");
    for (size_t i = 0; i < list.size() && c.error.empty(); ++i) {
      check_strategy_cost(c, list[i], "/strategies/" + std::to_string(i));
    }
    if (c.error.empty()) check_strategy_cost(c, doc["no_reuse"], "/no_reuse");
  } else if (kind == kSimulateReport) {
    if (!c.check(doc, "",
                 {{"model", Type::kModel},
                  {"tokens", Type::kInt},
                  {"partitions", Type::kInt},
                  {"micro_batch", Type::kInt},
                  {"strategy", Type::kString},
                  {"reuse", Type::kBool},
                  {"scope", Type::kString},
                  {"ops", Type::kInt},
                  {"makespan_us", Type::kInt},
                  {"busy_us", Type::kObject},
                  {"memory", Type::kObject},
                  {"valid", Type::kBool}})) {
      return c.error;
    }
    if (!c.check(doc["busy_us"], "/busy_us",
                 {{"compute", Type::kInt},
                  {"collective", Type::kInt},
                  {"copy", Type::kInt}})) {
      return c.error;
    }
    c.check(doc["memory"], "/memory",
            {{"model_states", Type::kAmount},
             {"peak_activations", Type::kAmount},
             {"peak_buffers", Type::kAmount},
             {"peak_combined", Type::kAmount},
             {"peak_host", Type::kAmount},
             {"total", Type::kAmount}});
  } else if (kind == kSearchIteration) {
    c.check(doc, "",
            {{"iter", Type::kInt},
             {"B", Type::kInt},
             {"n", Type::kInt},
             {"trials_run", Type::kInt},
             {"makespan_us", Type::kInt},
             {"cache_hit", Type::kBool},
             {"range_hit", Type::kBool},
             {"searched", Type::kBool}});
  } else if (kind == kSearchSummary) {
    if (!c.check(doc, "",
                 {{"iterations", Type::kInt},
                  {"searches", Type::kInt},
                  {"total_trials", Type::kInt},
                  {"cache_hits", Type::kInt},
                  {"cache_hit_rate", Type::kNumber},
                  {"range_hits", Type::kInt},
                  {"conflicts", Type::kInt},
                  {"ranges", Type::kArray}})) {
      return c.error;
    }
    const json& ranges = doc["ranges"];
    for (size_t i = 0; i < ranges.size() && c.error.empty(); ++i) {
      c.check(ranges[i], "/ranges/" + std::to_string(i),
              {{"lower", Type::kInt}, {"upper", Type::kInt}, {"n", Type::kInt}});
    }
  } else {
    c.fail("/report", "unknown report kind '" + kind + "'");
  }
  return c.error;
}

void validate_report(const json& doc) {
  const std::string e = schema_error(doc);
  if (!e.empty()) throw Error(ErrorCode::kParse, "report schema: " + e);
}

const std::vector<std::string>& sweep_columns() {
  static const std::vector<std::string> columns = {
      "preset",          "model_dim",         "hidden_dim",
      "num_experts",     "num_nodes",         "tokens",
      "partitions",      "micro_batch",       "strategy",
      "reuse",           "status",            "makespan_us",
      "forward_us",      "backward_us",       "compute_busy_us",
      "collective_busy_us", "copy_busy_us",   "peak_activations",
      "peak_buffers",    "peak_total_elements", "peak_total_bytes"};
  return columns;
}

}  // namespace moesim
