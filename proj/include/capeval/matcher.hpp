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

#ifndef CAPEVAL_MATCHER_HPP_
#define CAPEVAL_MATCHER_HPP_

#include <string>

#include "capeval/backend.hpp"
#include "capeval/templates.hpp"
#include "capeval/units.hpp"
#include "json.hpp"

namespace capeval {

struct MatchConfig {
  std::string backend;
  std::string template_id = template_ids::kMatch;
};

/// [{"fact", "identifier"?}, ...] in extraction order.
nlohmann::ordered_json predicted_units_json(const UnitSet& pred);
/// [{"id", "fact", "identifier"?}, ...] in oracle order.
nlohmann::ordered_json oracle_units_json(const OracleSet& oracle);

std::string build_matching_prompt(
    const UnitSet& pred, const OracleSet& oracle, const TemplateStore& templates,
    const std::string& template_id = template_ids::kMatch);

/// Applies a matching reply. "None"/null clears the link, ids the oracle does
/// not contain are dropped with a warning, units the reply omits stay unset.
UnitSet apply_matches(const UnitSet& pred, const nlohmann::json& reply,
                      const OracleSet& oracle);

/// Empty `pred` or `oracle` short-circuits to all-unmatched with no call.
UnitSet match(const UnitSet& pred, const OracleSet& oracle,
              const MatchConfig& cfg, Gateway& gateway,
              const TemplateStore& templates);

}  // namespace capeval

#endif  // CAPEVAL_MATCHER_HPP_
