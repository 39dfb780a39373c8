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

#include "capeval/units.hpp"

#include <set>
#include <unordered_set>

#include "capeval/error.hpp"
#include "capeval/text.hpp"

namespace capeval {

namespace {

std::optional<std::string> optional_string(const nlohmann::json& j,
                                           const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (it->is_string()) return it->get<std::string>();
  return it->dump();
}

// Accepts 0/1, booleans and "0"/"1" strings.
std::optional<bool> optional_flag(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (it->is_boolean()) return it->get<bool>();
  if (it->is_number()) return it->get<double>() != 0.0;
  if (it->is_string()) {
    const std::string s = text::trim(it->get<std::string>());
    if (s == "1" || s == "true" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "no") return false;
  }
  throw InvalidUnit(std::string("field '") + key + "' is not a 0/1 flag: " +
                    it->dump());
}

}  // namespace

OracleSet::OracleSet(std::vector<PrimitiveUnit> units,
                     std::string source_caption)
    : units_(std::move(units)), source_caption_(std::move(source_caption)) {
  std::unordered_set<std::string> seen;
  for (const auto& u : units_) {
    validate_unit(u);
    if (!u.id || u.id->empty()) {
      throw InvalidUnit("oracle unit without id: " + u.fact);
    }
    if (!seen.insert(*u.id).second) {
      throw InvalidUnit("duplicate oracle id: " + *u.id);
    }
  }
}

bool OracleSet::contains(const std::string& id) const {
  for (const auto& u : units_) {
    if (u.id && *u.id == id) return true;
  }
  return false;
}

OracleSet OracleSet::descriptive_only() const {
  std::vector<PrimitiveUnit> kept;
  for (const auto& u : units_) {
    if (u.descriptive) kept.push_back(u);
  }
  return OracleSet(std::move(kept), source_caption_);
}

std::pair<UnitSet, UnitSet> partition_descriptive(const UnitSet& set) {
  UnitSet yes{{}, set.source_caption};
  UnitSet no{{}, set.source_caption};
  for (const auto& u : set.units) {
    (u.descriptive ? yes : no).units.push_back(u);
  }
  return {std::move(yes), std::move(no)};
}

std::size_t count_matched_oracle_ids(const UnitSet& set) {
  std::set<std::string> ids;
  for (const auto& u : set.units) {
    if (u.matched_oracle_id && !u.matched_oracle_id->empty()) {
      ids.insert(*u.matched_oracle_id);
    }
  }
  return ids.size();
}

void validate_unit(const PrimitiveUnit& unit) {
  if (text::trim(unit.fact).empty()) {
    throw InvalidUnit("primitive unit with empty fact");
  }
}

nlohmann::ordered_json to_json(const PrimitiveUnit& unit) {
  nlohmann::ordered_json j;
  if (unit.id) j["id"] = *unit.id;
  j["fact"] = unit.fact;
  j["identifier"] = unit.identifier ? nlohmann::ordered_json(*unit.identifier)
                                    : nlohmann::ordered_json(nullptr);
  j["relevance"] = unit.descriptive ? 1 : 0;
  j["verification"] = unit.verified
                          ? nlohmann::ordered_json(*unit.verified ? 1 : 0)
                          : nlohmann::ordered_json(nullptr);
  j["matched_oracle_id"] = unit.matched_oracle_id
                               ? nlohmann::ordered_json(*unit.matched_oracle_id)
                               : nlohmann::ordered_json(nullptr);
  return j;
}

PrimitiveUnit unit_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidUnit("unit record is not an object");
  auto fact = j.find("fact");
  if (fact == j.end() || !fact->is_string()) {
    throw InvalidUnit("unit record without string 'fact'");
  }
  PrimitiveUnit u;
  u.fact = fact->get<std::string>();
  u.identifier = optional_string(j, "identifier");
  u.descriptive = optional_flag(j, "relevance").value_or(true);
  u.verified = optional_flag(j, "verification");
  u.matched_oracle_id = optional_string(j, "matched_oracle_id");
  u.id = optional_string(j, "id");
  validate_unit(u);
  return u;
}

nlohmann::ordered_json to_json(const UnitSet& set) {
  nlohmann::ordered_json units = nlohmann::ordered_json::array();
  for (const auto& u : set.units) units.push_back(to_json(u));
  return {{"source_caption", set.source_caption}, {"units", units}};
}

UnitSet unit_set_from_json(const nlohmann::json& j) {
  UnitSet set;
  set.source_caption = j.value("source_caption", std::string());
  for (const auto& u : j.at("units")) set.units.push_back(unit_from_json(u));
  return set;
}

nlohmann::ordered_json to_json(const OracleSet& set) {
  nlohmann::ordered_json units = nlohmann::ordered_json::array();
  for (const auto& u : set.units()) units.push_back(to_json(u));
  return {{"source_caption", set.source_caption()}, {"units", units}};
}

OracleSet oracle_set_from_json(const nlohmann::json& j) {
  std::vector<PrimitiveUnit> units;
  for (const auto& u : j.at("units")) units.push_back(unit_from_json(u));
  return OracleSet(std::move(units), j.value("source_caption", std::string()));
}

nlohmann::ordered_json to_json(const CaptionSample& s) {
  nlohmann::ordered_json j;
  j["sample_id"] = s.sample_id;
  j["image_ref"] = s.image_ref ? nlohmann::ordered_json(*s.image_ref)
                               : nlohmann::ordered_json(nullptr);
  j["prompt"] = s.prompt;
  j["caption"] = s.caption;
  j["system_tag"] = s.system_tag;
  return j;
}

CaptionSample caption_sample_from_json(const nlohmann::json& j) {
  CaptionSample s;
  s.sample_id = j.at("sample_id").get<std::string>();
  s.image_ref = optional_string(j, "image_ref");
  s.prompt = j.value("prompt", std::string());
  s.caption = j.value("caption", std::string());
  s.system_tag = j.value("system_tag", std::string());
  return s;
}

}  // namespace capeval
