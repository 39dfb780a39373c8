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

#include "capeval/matcher.hpp"

#include <spdlog/spdlog.h>

#include "capeval/reply_alignment.hpp"
#include "capeval/text.hpp"

namespace capeval {

nlohmann::ordered_json predicted_units_json(const UnitSet& pred) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& u : pred.units) {
    nlohmann::ordered_json j;
    j["fact"] = u.fact;
    if (u.identifier) j["identifier"] = *u.identifier;
    out.push_back(std::move(j));
  }
  return out;
}

nlohmann::ordered_json oracle_units_json(const OracleSet& oracle) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& u : oracle.units()) {
    nlohmann::ordered_json j;
    j["id"] = *u.id;
    j["fact"] = u.fact;
    if (u.identifier) j["identifier"] = *u.identifier;
    out.push_back(std::move(j));
  }
  return out;
}

std::string build_matching_prompt(const UnitSet& pred, const OracleSet& oracle,
                                  const TemplateStore& templates,
                                  const std::string& template_id) {
  return render_template(
      templates.get(template_id),
      {{placeholders::kPredictedUnits, predicted_units_json(pred).dump()},
       {placeholders::kOracleUnits, oracle_units_json(oracle).dump()}});
}

UnitSet apply_matches(const UnitSet& pred, const nlohmann::json& reply,
                      const OracleSet& oracle) {
  const nlohmann::json entries = as_entry_list(reply);
  const ReplyAlignment alignment = align_reply(pred.units, entries);
  if (alignment.positional_fallbacks > 0) {
    spdlog::warn("matching reply: {} entries aligned by position",
                 alignment.positional_fallbacks);
  }
  UnitSet out = pred;
  for (std::size_t i = 0; i < out.units.size(); ++i) {
    auto& unit = out.units[i];
    const auto& slot = alignment.entry_for_unit[i];
    if (!slot) continue;
    const auto& entry = entries[*slot];
    unit.matched_oracle_id.reset();
    if (!entry.is_object()) continue;
    auto it = entry.find("matched_oracle_id");
    if (it == entry.end() || it->is_null()) continue;
    std::string id = it->is_string() ? text::trim(it->get<std::string>())
                                     : it->dump();
    if (id.empty() || id == "None" || id == "none" || id == "null") continue;
    if (!oracle.contains(id)) {
      spdlog::warn("matching reply names unknown oracle id '{}'; treated as "
                   "no match",
                   id);
      continue;
    }
    unit.matched_oracle_id = std::move(id);
  }
  return out;
}

UnitSet match(const UnitSet& pred, const OracleSet& oracle,
              const MatchConfig& cfg, Gateway& gateway,
              const TemplateStore& templates) {
  if (pred.empty() || oracle.empty()) {
    UnitSet out = pred;
    for (auto& u : out.units) u.matched_oracle_id.reset();
    return out;
  }
  ChatRequest req;
  req.user = build_matching_prompt(pred, oracle, templates, cfg.template_id);
  req.decode = DecodeMode::kJsonExpected;
  return apply_matches(pred, gateway.complete_json(cfg.backend, req), oracle);
}

}  // namespace capeval
