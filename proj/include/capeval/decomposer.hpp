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

#ifndef CAPEVAL_DECOMPOSER_HPP_
#define CAPEVAL_DECOMPOSER_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include "capeval/backend.hpp"
#include "capeval/templates.hpp"
#include "capeval/units.hpp"
#include "json.hpp"

namespace capeval {

struct DecompositionConfig {
  std::string backend;
  /// Safety valve; the prompt itself asks for every unit.
  std::optional<std::size_t> max_units;
  std::string template_id = template_ids::kDecompose;
};

/// Throws EmptyCaption for a blank caption.
std::string build_decomposition_prompt(
    std::string_view caption, const TemplateStore& templates,
    const std::string& template_id = template_ids::kDecompose);

/// Maps a decomposition reply to units. Entries without a usable "fact" are
/// dropped with a warning; a missing "relevance" means descriptive.
/// Throws EmptyDecomposition when nothing survives.
UnitSet parse_units(const nlohmann::json& reply, std::string source_caption = {});
UnitSet parse_units(std::string_view raw, std::string source_caption = {});

UnitSet decompose(std::string_view caption, const DecompositionConfig& cfg,
                  Gateway& gateway, const TemplateStore& templates);

}  // namespace capeval

#endif  // CAPEVAL_DECOMPOSER_HPP_
