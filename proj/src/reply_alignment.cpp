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

#include "capeval/reply_alignment.hpp"

#include <deque>
#include <map>
#include <string>

#include "capeval/error.hpp"
#include "capeval/text.hpp"

namespace capeval {

nlohmann::json as_entry_list(const nlohmann::json& reply) {
  if (reply.is_array()) return reply;
  if (reply.is_object()) {
    const nlohmann::json* only_array = nullptr;
    int arrays = 0;
    for (const auto& [key, value] : reply.items()) {
      if (value.is_array()) {
        ++arrays;
        only_array = &value;
      }
    }
    if (arrays == 1 && !reply.contains("fact")) return *only_array;
    return nlohmann::json::array({reply});
  }
  throw JsonParseError("expected a JSON list of units", reply.dump());
}

ReplyAlignment align_reply(const std::vector<PrimitiveUnit>& units,
                           const nlohmann::json& reply) {
  ReplyAlignment out;
  out.entry_for_unit.assign(units.size(), std::nullopt);

  std::map<std::string, std::deque<std::size_t>> free_by_fact;
  for (std::size_t i = 0; i < units.size(); ++i) {
    free_by_fact[text::trim(units[i].fact)].push_back(i);
  }

  std::vector<bool> entry_used(reply.size(), false);
  for (std::size_t e = 0; e < reply.size(); ++e) {
    const auto& entry = reply[e];
    if (!entry.is_object() || !entry.contains("fact") ||
        !entry["fact"].is_string()) {
      continue;
    }
    auto it = free_by_fact.find(text::trim(entry["fact"].get<std::string>()));
    if (it == free_by_fact.end() || it->second.empty()) continue;
    out.entry_for_unit[it->second.front()] = e;
    it->second.pop_front();
    entry_used[e] = true;
  }

  for (std::size_t e = 0; e < reply.size(); ++e) {
    if (entry_used[e]) continue;
    if (e < units.size() && !out.entry_for_unit[e]) {
      out.entry_for_unit[e] = e;
      ++out.positional_fallbacks;
    } else {
      ++out.unaligned_entries;
    }
  }
  return out;
}

}  // namespace capeval
