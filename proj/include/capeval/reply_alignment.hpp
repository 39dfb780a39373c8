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

#ifndef CAPEVAL_REPLY_ALIGNMENT_HPP_
#define CAPEVAL_REPLY_ALIGNMENT_HPP_

#include <cstddef>
#include <optional>
#include <vector>

#include "capeval/units.hpp"
#include "json.hpp"

namespace capeval {

struct ReplyAlignment {
  /// For each unit, the index of the reply entry describing it.
  std::vector<std::optional<std::size_t>> entry_for_unit;
  std::size_t positional_fallbacks = 0;
  std::size_t unaligned_entries = 0;
};

/// Aligns a judge's per-unit reply list with the units it was asked about.
///
/// Pass 1 pairs entries with units by exact fact text (both trimmed);
/// repeated facts are consumed in order. Pass 2 gives each leftover entry the
/// unit at its own list position when that unit is still free.
ReplyAlignment align_reply(const std::vector<PrimitiveUnit>& units,
                           const nlohmann::json& reply);

/// Coerces a reply into a list of entries: arrays pass through, an object
/// with a single array member yields that member, any other object becomes a
/// one-element list.
nlohmann::json as_entry_list(const nlohmann::json& reply);

}  // namespace capeval

#endif  // CAPEVAL_REPLY_ALIGNMENT_HPP_
