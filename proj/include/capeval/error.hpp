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

#ifndef CAPEVAL_ERROR_HPP_
#define CAPEVAL_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <utility>

namespace capeval {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failures attributable to a model backend (network, auth, fixtures).
/// The CLI maps these to exit code 3.
class BackendError : public Error {
 public:
  using Error::Error;
};

class NetworkError : public BackendError {
 public:
  using BackendError::BackendError;
};

class AuthError : public BackendError {
 public:
  using BackendError::BackendError;
};

class FixtureMissing : public BackendError {
 public:
  FixtureMissing(const std::string& backend, std::string key)
      : BackendError("no fixture for backend '" + backend + "' key " + key),
        key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Model output that could not be parsed as JSON, even after a repair prompt.
class JsonParseError : public Error {
 public:
  JsonParseError(const std::string& what, std::string raw)
      : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

 private:
  std::string raw_;
};

#define CAPEVAL_DEFINE_ERROR(Name) \
  class Name : public Error {      \
   public:                         \
    using Error::Error;            \
  }

CAPEVAL_DEFINE_ERROR(EmptyCaption);
CAPEVAL_DEFINE_ERROR(EmptyDecomposition);
CAPEVAL_DEFINE_ERROR(EmptyUnitSet);
CAPEVAL_DEFINE_ERROR(EmptyInput);
CAPEVAL_DEFINE_ERROR(InvalidUnit);
CAPEVAL_DEFINE_ERROR(TooFewCandidates);
CAPEVAL_DEFINE_ERROR(NoPairsForChannel);
CAPEVAL_DEFINE_ERROR(NonFiniteLoss);
CAPEVAL_DEFINE_ERROR(DegenerateInput);
CAPEVAL_DEFINE_ERROR(NoValidSamples);
CAPEVAL_DEFINE_ERROR(SingleSystem);
CAPEVAL_DEFINE_ERROR(IdMismatch);
CAPEVAL_DEFINE_ERROR(MissingOracle);
CAPEVAL_DEFINE_ERROR(ConfigError);
CAPEVAL_DEFINE_ERROR(UsageError);
CAPEVAL_DEFINE_ERROR(TemplateError);

#undef CAPEVAL_DEFINE_ERROR

}  // namespace capeval

#endif  // CAPEVAL_ERROR_HPP_
