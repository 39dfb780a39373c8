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

#include "capeval/dataset_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "capeval/error.hpp"

namespace capeval::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw UsageError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<CaptionSample> read_samples(const fs::path& path) {
  std::vector<CaptionSample> samples;
  std::set<std::string> seen;
  for (const auto& j : read_jsonl(path)) {
    CaptionSample s;
    try {
      s = caption_sample_from_json(j);
    } catch (const json::exception& e) {
      throw UsageError(path.string() + ": bad sample record: " + e.what());
    }
    if (!seen.insert(s.sample_id).second) {
      throw UsageError(path.string() + ": duplicate sample_id '" + s.sample_id + "'");
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

std::map<std::string, OracleRecord> read_oracles(const fs::path& path) {
  std::map<std::string, OracleRecord> out;
  for (const auto& j : read_jsonl(path)) {
    OracleRecord rec;
    try {
      rec.sample_id = j.at("sample_id").get<std::string>();
      rec.caption = j.value("caption", std::string{});
      if (j.contains("units") && !j.at("units").is_null()) {
        json set = {{"units", j.at("units")}, {"source_caption", rec.caption}};
        rec.units = oracle_set_from_json(set);
      }
    } catch (const json::exception& e) {
      throw UsageError(path.string() + ": bad oracle record: " + e.what());
    }
    const std::string id = rec.sample_id;
    if (!out.emplace(id, std::move(rec)).second) {
      throw UsageError(path.string() + ": duplicate oracle for '" + id + "'");
    }
  }
  return out;
}

OracleSet oracle_from_units(const UnitSet& units) {
  std::vector<PrimitiveUnit> out;
  out.reserve(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    PrimitiveUnit u = units.units[i];
    u.id = "o" + std::to_string(i + 1);
    u.verified.reset();
    u.matched_oracle_id.reset();
    out.push_back(std::move(u));
  }
  return OracleSet(std::move(out), units.source_caption);
}

std::string media_type_for(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  throw UsageError("unsupported image type: " + path.string());
}

std::optional<ImageAttachment> load_image(const CaptionSample& sample,
                                          const fs::path& base_dir) {
  if (!sample.image_ref || sample.image_ref->empty()) return std::nullopt;
  std::string ref = *sample.image_ref;
  constexpr std::string_view kFileScheme = "file://";
  if (ref.rfind(kFileScheme, 0) == 0) ref.erase(0, kFileScheme.size());
  if (ref.find("://") != std::string::npos) {
    throw UsageError("only local image paths are supported: " + ref);
  }
  fs::path path(ref);
  if (path.is_relative()) path = base_dir / path;
  const std::string bytes = read_text(path);
  ImageAttachment image;
  image.bytes.assign(bytes.begin(), bytes.end());
  image.media_type = media_type_for(path);
  return image;
}

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw UsageError("CSV lacks column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = record.size() == 1 && record.front().empty();
    if (!blank) records.push_back(std::move(record));
    record.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
    } else if (c != '\r') {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw UsageError("CSV ends inside a quoted field");
  if (field_started || !record.empty()) end_record();

  CsvTable table;
  if (records.empty()) return table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != table.header.size()) {
      throw UsageError("CSV row " + std::to_string(r + 1) + " has " +
                       std::to_string(records[r].size()) + " fields, expected " +
                       std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

CsvTable read_csv(const fs::path& path) { return parse_csv(read_text(path)); }

}  // namespace capeval::io
