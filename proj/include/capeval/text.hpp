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

#ifndef CAPEVAL_TEXT_HPP_
#define CAPEVAL_TEXT_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace capeval::text {

/// Strips ASCII whitespace from both ends.
std::string trim(std::string_view s);

/// Unicode NFC normalization of UTF-8 text. Invalid UTF-8 is returned as-is.
std::string nfc(std::string_view utf8);

/// Lower-case hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::string base64_encode(std::span<const std::uint8_t> data);

/// First maximal run of ASCII letters, lower-cased; empty if none.
std::string first_alpha_token(std::string_view s);

}  // namespace capeval::text

#endif  // CAPEVAL_TEXT_HPP_
