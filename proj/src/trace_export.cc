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

#include "moesim/trace_export.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace moesim {

std::int64_t to_microseconds(double seconds) {
  return static_cast<std::int64_t>(std::floor(seconds * 1e6 + 0.5));
}

namespace {

std::vector<OpId> by_start(const Trace& trace) {
  std::vector<OpId> ids(trace.events().size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&](OpId a, OpId b) {
    return trace.event(a).start < trace.event(b).start;
  });
  return ids;
}

}  // namespace

void write_trace_jsonl(std::ostream& out, const Schedule& schedule,
                       const Trace& trace) {
  for (OpId id : by_start(trace)) {
    const OpNode& op = schedule.op(id);
    const OpEvent& e = trace.event(id);
    nlohmann::ordered_json j;
    j["op"] = op.label;
    j["kind"] = op_kind_name(op.kind);
    j["direction"] = direction_name(op.direction);
    j["partition"] = op.partition;
    j["stream"] = stream_name(op.stream);
    j["start_us"] = to_microseconds(e.start);
    j["end_us"] = to_microseconds(e.end);
    out << j.dump() << '\n';
  }
}

void write_trace_events(std::ostream& out, const Schedule& schedule,
                        const Trace& trace) {
  nlohmann::ordered_json events = nlohmann::ordered_json::array();
  for (StreamKind k : kAllStreams) {
    nlohmann::ordered_json meta;
    meta["name"] = "thread_name";
    meta["ph"] = "M";
    meta["pid"] = 0;
    meta["tid"] = static_cast<int>(k);
    meta["args"] = {{"name", stream_name(k)}};
    events.push_back(std::move(meta));
  }
  for (OpId id : by_start(trace)) {
    const OpNode& op = schedule.op(id);
    const OpEvent& e = trace.event(id);
    const std::int64_t ts = to_microseconds(e.start);
    nlohmann::ordered_json j;
    j["name"] = op.label;
    j["cat"] = op_kind_name(op.kind);
    j["ph"] = "X";
    j["ts"] = ts;
    j["dur"] = to_microseconds(e.end) - ts;
    j["pid"] = 0;
    j["tid"] = static_cast<int>(op.stream);
    j["args"] = {{"partition", op.partition},
                 {"direction", direction_name(op.direction)}};
    events.push_back(std::move(j));
  }
  nlohmann::ordered_json doc;
  doc["traceEvents"] = std::move(events);
  doc["displayTimeUnit"] = "ms";
  out << doc.dump() << '\n';
}

}  // namespace moesim
