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

#ifndef CAPEVAL_UNITS_HPP_
#define CAPEVAL_UNITS_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace capeval {

/// One atomic, independently verifiable statement extracted from a caption.
///
/// `descriptive` mirrors the decomposition prompt's "relevance" field.
/// `id` is only set on oracle (reference) units; `matched_oracle_id` and
/// `verified` are filled by the matching and verification stages.
struct PrimitiveUnit {
  std::string fact;
  std::optional<std::string> identifier;
  bool descriptive = true;
  std::optional<bool> verified;
  std::optional<std::string> matched_oracle_id;
  std::optional<std::string> id;

  bool operator==(const PrimitiveUnit&) const = default;
};

/// Units extracted from a model caption, in extraction order.
struct UnitSet {
  std::vector<PrimitiveUnit> units;
  std::string source_caption;

  std::size_t size() const { return units.size(); }
  bool empty() const { return units.empty(); }
  bool operator==(const UnitSet&) const = default;
};

/// Reference units. Every unit carries a unique id.
class OracleSet {
 public:
  OracleSet() = default;
  /// Throws InvalidUnit on a missing, empty, or duplicate id, or an empty fact.
  OracleSet(std::vector<PrimitiveUnit> units, std::string source_caption);

  const std::vector<PrimitiveUnit>& units() const { return units_; }
  const std::string& source_caption() const { return source_caption_; }
  std::size_t size() const { return units_.size(); }
  bool empty() const { return units_.empty(); }
  bool contains(const std::string& id) const;
  /// Subset holding only descriptive units; order kept.
  OracleSet descriptive_only() const;

  bool operator==(const OracleSet&) const = default;

 private:
  std::vector<PrimitiveUnit> units_;
  std::string source_caption_;
};

/// A caption to evaluate or a prompt to sample from.
struct CaptionSample {
  std::string sample_id;
  std::optional<std::string> image_ref;
  std::string prompt;
  std::string caption;
  std::string system_tag;

  bool operator==(const CaptionSample&) const = default;
};

/// Splits into (descriptive, non-descriptive), each keeping original order.
std::pair<UnitSet, UnitSet> partition_descriptive(const UnitSet& set);

/// Number of distinct oracle ids referenced by units of `set`.
std::size_t count_matched_oracle_ids(const UnitSet& set);

/// Throws InvalidUnit when the fact is blank.
void validate_unit(const PrimitiveUnit& unit);

// JSON record shape:
//   {"fact", "identifier", "relevance": 0|1, "verification": 0|1|null,
//    "matched_oracle_id"}  plus "id" on oracle units.
nlohmann::ordered_json to_json(const PrimitiveUnit& unit);
PrimitiveUnit unit_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const UnitSet& set);
UnitSet unit_set_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const OracleSet& set);
/// Missing "relevance" on oracle units defaults to descriptive.
OracleSet oracle_set_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const CaptionSample& sample);
CaptionSample caption_sample_from_json(const nlohmann::json& j);

}  // namespace capeval

#endif  // CAPEVAL_UNITS_HPP_
