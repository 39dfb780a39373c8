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

#include "capeval/templates.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "builtin_templates.hpp"
#include "capeval/error.hpp"

namespace capeval {

TemplateStore TemplateStore::builtin() {
  TemplateStore store;
  for (const auto& [id, text] : detail::builtin_templates()) {
    store.templates_[std::string(id)] = std::string(text);
  }
  return store;
}

TemplateStore TemplateStore::with_overrides(const std::filesystem::path& dir) {
  TemplateStore store = builtin();
  if (!std::filesystem::is_directory(dir)) {
    throw TemplateError("templates dir not found: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    store.templates_[entry.path().stem().string()] = ss.str();
  }
  return store;
}

const std::string& TemplateStore::get(const std::string& id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw TemplateError("unknown template id: " + id);
  return it->second;
}

std::string render_template(
    std::string_view tmpl,
    const std::vector<std::pair<std::string_view, std::string>>& substitutions) {
  struct Hit {
    std::size_t pos;
    std::size_t len;
    const std::string* value;
  };
  std::vector<Hit> hits;
  for (const auto& [placeholder, value] : substitutions) {
    const std::size_t pos = tmpl.find(placeholder);
    if (pos == std::string_view::npos) {
      throw TemplateError("placeholder " + std::string(placeholder) +
                          " not found in template");
    }
    hits.push_back({pos, placeholder.size(), &value});
  }
  std::sort(hits.begin(), hits.end(),
            [](const Hit& a, const Hit& b) { return a.pos < b.pos; });
  std::string out;
  std::size_t cursor = 0;
  for (const auto& hit : hits) {
    out.append(tmpl.substr(cursor, hit.pos - cursor));
    out.append(*hit.value);
    cursor = hit.pos + hit.len;
  }
  out.append(tmpl.substr(cursor));
  return out;
}

const std::vector<std::string>& default_caption_prompts() {
  static const std::vector<std::string> prompts = [] {
    std::vector<std::string> out;
    std::istringstream in{std::string(detail::builtin_caption_prompts())};
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(line);
    }
    return out;
  }();
  return prompts;
}

}  // namespace capeval
