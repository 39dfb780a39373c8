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

#include "capeval/decomposer.hpp"

#include <spdlog/spdlog.h>

#include "capeval/error.hpp"
#include "capeval/json_extract.hpp"
#include "capeval/reply_alignment.hpp"
#include "capeval/text.hpp"

namespace capeval {

std::string build_decomposition_prompt(std::string_view caption,
                                       const TemplateStore& templates,
                                       const std::string& template_id) {
  if (text::trim(caption).empty()) throw EmptyCaption("caption is empty");
  return render_template(templates.get(template_id),
                         {{placeholders::kCaption, std::string(caption)}});
}

UnitSet parse_units(const nlohmann::json& reply, std::string source_caption) {
  const nlohmann::json entries = as_entry_list(reply);
  UnitSet set{{}, std::move(source_caption)};
  for (const auto& entry : entries) {
    try {
      PrimitiveUnit unit = unit_from_json(entry);
      unit.verified.reset();
      unit.matched_oracle_id.reset();
      unit.id.reset();
      set.units.push_back(std::move(unit));
    } catch (const InvalidUnit& e) {
      spdlog::warn("dropping decomposition entry {}: {}", entry.dump(), e.what());
    }
  }
  if (set.units.empty()) {
    throw EmptyDecomposition("decomposition produced no valid units");
  }
  return set;
}

UnitSet parse_units(std::string_view raw, std::string source_caption) {
  return parse_units(extract_json_or_throw(raw), std::move(source_caption));
}

UnitSet decompose(std::string_view caption, const DecompositionConfig& cfg,
                  Gateway& gateway, const TemplateStore& templates) {
  ChatRequest req;
  req.user = build_decomposition_prompt(caption, templates, cfg.template_id);
  req.decode = DecodeMode::kJsonExpected;
  UnitSet set =
      parse_units(gateway.complete_json(cfg.backend, req), std::string(caption));
  if (cfg.max_units && set.units.size() > *cfg.max_units) {
    spdlog::warn("decomposition returned {} units; keeping the first {}",
                 set.units.size(), *cfg.max_units);
    set.units.resize(*cfg.max_units);
  }
  return set;
}

}  // namespace capeval
