// Copyright 2026 The capeval Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CAPEVAL_JSON_EXTRACT_HPP_
#define CAPEVAL_JSON_EXTRACT_HPP_

#include <optional>
#include <string_view>

#include "json.hpp"

namespace capeval {

/// Finds the first well-formed JSON array or object embedded in model output.
///
/// Code fences and surrounding prose are skipped. Each candidate opening
/// bracket is tried strictly first, then with a lenient rewrite that maps
/// Python literals (None/True/False) to JSON and drops trailing commas.
/// Returns nullopt when nothing parses.
std::optional<nlohmann::json> extract_json(std::string_view raw);

/// As extract_json, but throws JsonParseError carrying `raw`.
nlohmann::json extract_json_or_throw(std::string_view raw);

}  // namespace capeval

#endif  // CAPEVAL_JSON_EXTRACT_HPP_
