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

#ifndef CAPEVAL_TEMPLATES_HPP_
#define CAPEVAL_TEMPLATES_HPP_

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace capeval {

namespace template_ids {
inline constexpr const char* kDecompose = "decompose";
inline constexpr const char* kMatch = "match";
inline constexpr const char* kVerify = "verify";
inline constexpr const char* kFeedQuillVerify = "feedquill_verify";
}  // namespace template_ids

namespace placeholders {
inline constexpr std::string_view kCaption = "{Caption Here}";
inline constexpr std::string_view kPredictedUnits =
    "{set of units for generated caption}";
inline constexpr std::string_view kOracleUnits =
    "{set of units for human-written caption}";
inline constexpr std::string_view kReferenceCaption = "{reference caption}";
inline constexpr std::string_view kUnits = "{primitive information units}";
inline constexpr std::string_view kStatement = "{STATEMENT}";
}  // namespace placeholders

/// Prompt templates by id. The shipped templates are compiled in; a
/// directory may override any of them with `<id>.txt`.
class TemplateStore {
 public:
  static TemplateStore builtin();
  /// Builtins overlaid with every `*.txt` found in `dir`.
  static TemplateStore with_overrides(const std::filesystem::path& dir);

  /// Throws TemplateError for an unknown id.
  const std::string& get(const std::string& id) const;
  bool contains(const std::string& id) const { return templates_.count(id) != 0; }

 private:
  std::map<std::string, std::string> templates_;
};

/// Substitutes each placeholder once, in a single left-to-right pass, so
/// substituted text is never rescanned. Throws TemplateError when a
/// placeholder does not occur in the template.
std::string render_template(
    std::string_view tmpl,
    const std::vector<std::pair<std::string_view, std::string>>& substitutions);

/// The shipped caption-prompt pool, one prompt per entry.
const std::vector<std::string>& default_caption_prompts();

}  // namespace capeval

#endif  // CAPEVAL_TEMPLATES_HPP_
