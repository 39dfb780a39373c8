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

#ifndef CAPEVAL_VERIFIER_HPP_
#define CAPEVAL_VERIFIER_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capeval/backend.hpp"
#include "capeval/templates.hpp"
#include "capeval/units.hpp"
#include "json.hpp"

namespace capeval {

struct VerifyConfig {
  std::string backend;
  std::string template_id = template_ids::kVerify;
};

std::string build_verification_prompt(
    const UnitSet& pred, std::string_view reference,
    const TemplateStore& templates,
    const std::string& template_id = template_ids::kVerify);

/// Fills `verified` from a batch reply of {"verification": 1/0} entries.
/// Units missing from the reply are marked incorrect with a warning.
UnitSet apply_verdicts(const UnitSet& pred, const nlohmann::json& reply);

/// Batch verification against the reference caption (and image, if given).
/// Throws EmptyUnitSet for an empty `pred`.
UnitSet verify_dcscore(const UnitSet& pred, std::string_view reference,
                       const std::optional<ImageAttachment>& image,
                       const VerifyConfig& cfg, Gateway& gateway,
                       const TemplateStore& templates);

std::string build_feedquill_prompt(std::string_view statement,
                                   const TemplateStore& templates);

/// True iff the first alphabetic token of the reply is "yes" (any case).
bool parse_yes_no(std::string_view reply);

/// Strict majority of yes votes among responders; ties are incorrect.
bool majority_vote(std::size_t yes_votes, std::size_t responders);

/// Asks every ensemble backend the yes/no question concurrently. Backends that
/// fail are left out of the vote with a warning; if all fail the last error
/// is rethrown.
bool verify_feedquill(std::string_view statement,
                      const std::vector<std::string>& backends,
                      const std::optional<ImageAttachment>& image,
                      Gateway& gateway, const TemplateStore& templates);

}  // namespace capeval

#endif  // CAPEVAL_VERIFIER_HPP_
