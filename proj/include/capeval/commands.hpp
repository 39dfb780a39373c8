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

#ifndef CAPEVAL_COMMANDS_HPP_
#define CAPEVAL_COMMANDS_HPP_

#include <cstdint>
#include <exception>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "capeval/backend.hpp"
#include "capeval/config.hpp"
#include "capeval/metricstats.hpp"

namespace capeval {

namespace exit_codes {
inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;
inline constexpr int kPartial = 2;
inline constexpr int kBackend = 3;
}  // namespace exit_codes

/// Backend failures (including unparseable judge output) map to 3, everything
/// else to 1.
int exit_code_for(std::exception_ptr error);

/// Settings shared by every subcommand, layered over the config file.
struct CommandOptions {
  std::filesystem::path out_dir = ".";
  std::optional<std::int64_t> seed;
  bool offline = false;
  std::optional<std::string> backend;
  /// Replaces all transports; used for fixture authoring and tests.
  std::shared_ptr<Transport> transport_override;
};

/// Applies --seed and --backend to the configuration.
RunConfig resolve_config(RunConfig cfg, const CommandOptions& opts);

/// reports.jsonl + summary.json. Returns 0, or 2 when some samples failed.
int cmd_score(const std::filesystem::path& samples,
              const std::filesystem::path& oracles, const RunConfig& cfg,
              const CommandOptions& opts);

/// d_precision.jsonl + d_richness.jsonl + prefgen_summary.json.
int cmd_prefgen(const std::filesystem::path& samples, const RunConfig& cfg,
                const CommandOptions& opts);

/// rm_precision.json, rm_richness.json, ppo_curve.csv, align_summary.json and
/// config_snapshot.json.
int cmd_align(const std::filesystem::path& d_precision,
              const std::filesystem::path& d_richness, const RunConfig& cfg,
              const CommandOptions& opts);

struct StatsInputs {
  std::optional<std::filesystem::path> metric_csv;
  std::optional<std::filesystem::path> human_csv;
  std::optional<std::filesystem::path> votes_csv;
  std::optional<stats::EloMode> mode;  // overrides the config
};

/// stats.json with correlation statistics and/or ratings.
int cmd_stats(const StatsInputs& inputs, const RunConfig& cfg,
              const CommandOptions& opts);

/// Deterministic prompt choice for samples that carry none.
const std::string& pick_prompt(const std::vector<std::string>& pool,
                               const std::string& sample_id, std::int64_t seed);

}  // namespace capeval

#endif  // CAPEVAL_COMMANDS_HPP_
