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

#ifndef CAPEVAL_DATASET_IO_HPP_
#define CAPEVAL_DATASET_IO_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capeval/backend.hpp"
#include "capeval/units.hpp"
#include "json.hpp"

namespace capeval::io {

/// One JSON value per non-blank line; errors name the file and line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

/// Throws UsageError on duplicate sample ids.
std::vector<CaptionSample> read_samples(const std::filesystem::path& path);

/// Ground truth for one sample. Units may be absent, in which case the
/// caption is decomposed by a configured backend.
struct OracleRecord {
  std::string sample_id;
  std::string caption;
  std::optional<OracleSet> units;
};

/// {"sample_id", "caption", "units": [{"id", "fact", "identifier"?, "relevance"?}]}
std::map<std::string, OracleRecord> read_oracles(const std::filesystem::path& path);

/// Oracle ids o1, o2, ... in order, for model-decomposed references.
OracleSet oracle_from_units(const UnitSet& units);

/// Media type from the file extension (png, jpg/jpeg, gif, webp).
std::string media_type_for(const std::filesystem::path& path);

/// Reads the sample's image, resolving relative refs against base_dir.
/// Returns nullopt when the sample has no image_ref.
std::optional<ImageAttachment> load_image(const CaptionSample& sample,
                                          const std::filesystem::path& base_dir);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws UsageError when missing.
  std::size_t column(std::string_view name) const;
};

/// RFC 4180 subset: comma separated, double-quoted fields with "" escapes.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
/// Writes through a sibling temp file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace capeval::io

#endif  // CAPEVAL_DATASET_IO_HPP_
