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

// Trace serialization: one JSON object per line, or the browser trace-event
// format. Times are integer microseconds rounded half-up.

#pragma once

#include <cstdint>
#include <ostream>

#include "moesim/pipesim.h"

namespace moesim {

std::int64_t to_microseconds(double seconds);

void write_trace_jsonl(std::ostream& out, const Schedule& schedule,
                       const Trace& trace);

void write_trace_events(std::ostream& out, const Schedule& schedule,
                        const Trace& trace);

}  // namespace moesim
