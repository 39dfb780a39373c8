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

#ifndef CAPEVAL_CONFIG_HPP_
#define CAPEVAL_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "capeval/alignment/ppo.hpp"
#include "capeval/alignment/reward_model.hpp"
#include "capeval/alignment/toy_policy.hpp"
#include "capeval/backend.hpp"
#include "capeval/metricstats.hpp"
#include "json.hpp"

namespace capeval {

struct ScoreSettings {
  std::string decomposer;
  std::string matcher;
  std::string verifier;
  std::optional<std::size_t> max_units;
  /// Backend that decomposes oracle captions shipped without units.
  std::optional<std::string> oracle_decomposer;
  std::size_t max_parallel_samples = 4;
};

struct PrefgenSettings {
  std::string generator;
  std::string decomposer;
  std::vector<std::string> ensemble;
  int n_candidates = 4;
  double min_margin = 0.0;
  std::optional<double> precision_floor;
  /// Prompts assigned to samples without one; empty means the built-in pool.
  std::vector<std::string> prompt_pool;
  std::size_t max_parallel_samples = 4;
};

struct AlignSettings {
  alignment::TokenSpace space;
  int steps = 200;
  double init_stddev = 0.0;
  int eval_samples = 256;
  alignment::RewardTrainingOptions rm;
  alignment::PPOConfig<double> ppo;
};

struct StatsSettings {
  stats::EloMode mode = stats::EloMode::kBradleyTerry;
  stats::EloOptions elo;
};

struct RunConfig {
  std::vector<BackendSpec> backends;
  std::optional<std::filesystem::path> templates_dir;
  std::filesystem::path cache_dir;
  std::int64_t seed = 0;
  ScoreSettings score;
  PrefgenSettings prefgen;
  AlignSettings align;
  StatsSettings stats;

  const BackendSpec* find_backend(const std::string& name) const;
  /// Every role must name a configured backend. Throws ConfigError.
  void validate() const;
};

/// Replaces each ${NAME} with the environment value; unset names are errors.
std::string interpolate_env(std::string_view text);

/// Relative paths resolve against `base_dir`. Roles left empty fall back to
/// the only backend when exactly one is configured.
RunConfig config_from_json(const nlohmann::json& j,
                           const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

/// Points every role at `backend`.
void apply_backend_override(RunConfig& cfg, const std::string& backend);

/// Fully resolved configuration, defaults included. Secrets never appear:
/// only the environment variable names are recorded.
nlohmann::ordered_json to_json(const RunConfig& cfg);

}  // namespace capeval

#endif  // CAPEVAL_CONFIG_HPP_
