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

#include "capeval/json_extract.hpp"

#include <cctype>
#include <string>

#include "capeval/error.hpp"

namespace capeval {

namespace {

// Index one past the bracket closing the one at `open`, ignoring brackets
// inside strings. npos when unbalanced.
std::size_t balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      ++depth;
    } else if (c == ']' || c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

std::string lenient_rewrite(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      out.push_back(c);
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out.push_back(c);
      continue;
    }
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && (s[j] == ']' || s[j] == '}')) continue;
    }
    const bool boundary = i == 0 || !is_word_char(s[i - 1]);
    auto literal = [&](std::string_view word, std::string_view repl) {
      if (!boundary || s.substr(i, word.size()) != word) return false;
      const std::size_t after = i + word.size();
      if (after < s.size() && is_word_char(s[after])) return false;
      out.append(repl);
      i = after - 1;
      return true;
    };
    if (literal("None", "null") || literal("True", "true") ||
        literal("False", "false")) {
      continue;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::optional<nlohmann::json> extract_json(std::string_view raw) {
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '[' && raw[i] != '{') continue;
    const std::size_t end = balanced_end(raw, i);
    if (end == std::string_view::npos) continue;
    const std::string_view candidate = raw.substr(i, end - i);
    auto strict = nlohmann::json::parse(candidate, nullptr, false);
    if (!strict.is_discarded()) return strict;
    auto lenient = nlohmann::json::parse(lenient_rewrite(candidate), nullptr, false);
    if (!lenient.is_discarded()) return lenient;
  }
  return std::nullopt;
}

nlohmann::json extract_json_or_throw(std::string_view raw) {
  auto parsed = extract_json(raw);
  if (!parsed) {
    throw JsonParseError("no JSON array or object in model output",
                         std::string(raw));
  }
  return *std::move(parsed);
}

}  // namespace capeval
