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

// JSON shapes of the reports written by the command-line tool, and
// validators that check a parsed document against them.

#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "moesim/core.h"
#include "moesim/memmodel.h"

namespace moesim {

using ojson = nlohmann::ordered_json;

/// {"elements": n, "bytes": n * element_bytes}
ojson amount_json(Count elements, int element_bytes);
ojson memory_report_json(const MemoryReport& report);
ojson model_json(const ModelSpec& spec, std::string_view preset);
/// Integer microseconds.
ojson duration_json(double seconds);

/// Report kinds carried in each document's "report" field.
inline constexpr std::string_view kMemoryReport = "memory";
inline constexpr std::string_view kPlanReport = "plan";
inline constexpr std::string_view kSimulateReport = "simulate";
inline constexpr std::string_view kSearchIteration = "search-iteration";
inline constexpr std::string_view kSearchSummary = "search-summary";

/// Returns the first schema violation as "<json pointer>: <problem>", or
/// empty when the document conforms. Dispatches on the "report" field.
std::string schema_error(const nlohmann::json& doc);

/// Throws kParse with the schema_error message.
void validate_report(const nlohmann::json& doc);

/// Header of the sweep CSV, in column order.
const std::vector<std::string>& sweep_columns();

}  // namespace moesim
