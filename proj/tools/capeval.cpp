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

// capeval: caption evaluation, preference data generation, toy alignment and
// agreement statistics.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "capeval/backend.hpp"
#include "capeval/commands.hpp"
#include "capeval/config.hpp"
#include "capeval/dataset_io.hpp"
#include "capeval/error.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::int64_t> seed;
  std::string out = ".";
  std::optional<std::string> backend;
  bool offline = false;
  std::string record_rules;
  std::string log_level = "warn";
};

capeval::RunConfig load(const GlobalFlags& g) {
  if (g.config.empty()) {
    throw capeval::UsageError("--config is required");
  }
  return capeval::load_config(g.config);
}

capeval::CommandOptions options(const GlobalFlags& g) {
  capeval::CommandOptions opts;
  opts.out_dir = g.out;
  opts.seed = g.seed;
  opts.offline = g.offline;
  opts.backend = g.backend;
  if (!g.record_rules.empty()) {
    const auto rules = nlohmann::json::parse(capeval::io::read_text(g.record_rules));
    opts.transport_override = std::make_shared<capeval::RecordingTransport>(
        std::make_shared<capeval::RuleTransport>(capeval::RuleTransport::from_json(rules)));
  }
  return opts;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Caption evaluation and preference-optimization toolkit"};
  app.require_subcommand(1);
  GlobalFlags g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--seed", g.seed, "Run-level seed (overrides the config)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--backend", g.backend, "Route every model role to this backend");
  app.add_flag("--offline", g.offline, "Forbid network access; mock and cached replies only");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");
  app.add_option("--record-fixtures", g.record_rules,
                 "Answer from a rules file and record replies as fixtures")
      ->group("");

  auto* score = app.add_subcommand("score", "Score captions against oracle units");
  std::string samples, oracles;
  score->add_option("samples", samples, "samples.jsonl")->required();
  score->add_option("oracles", oracles, "oracles.jsonl")->required();

  auto* prefgen = app.add_subcommand("prefgen", "Build precision and richness preference pairs");
  std::string pref_samples;
  prefgen->add_option("samples", pref_samples, "samples.jsonl")->required();

  auto* align = app.add_subcommand("align", "Train toy reward models and run PPO");
  std::string d_precision, d_richness;
  align->add_option("d_precision", d_precision, "precision pairs JSONL")->required();
  align->add_option("d_richness", d_richness, "richness pairs JSONL")->required();

  auto* stats = app.add_subcommand("stats", "Agreement statistics or ratings");
  std::string metric, human, votes, mode;
  stats->add_option("--metric", metric, "metric scores CSV (sample_id[,system_tag],score)");
  stats->add_option("--human", human, "human scores CSV (sample_id[,system_tag],score)");
  stats->add_option("--votes", votes, "votes CSV (sample_id,system_a,system_b,outcome)");
  stats->add_option("--mode", mode, "online-elo or bradley-terry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Help and version requests exit 0; every other parse failure is a usage error.
    const int rc = app.exit(e);
    return rc == 0 ? capeval::exit_codes::kOk : capeval::exit_codes::kUsage;
  }

  auto logger = spdlog::stderr_color_mt("capeval");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    const capeval::RunConfig cfg = load(g);
    const capeval::CommandOptions opts = options(g);
    fs::create_directories(opts.out_dir);
    if (*score) return capeval::cmd_score(samples, oracles, cfg, opts);
    if (*prefgen) return capeval::cmd_prefgen(pref_samples, cfg, opts);
    if (*align) return capeval::cmd_align(d_precision, d_richness, cfg, opts);
    capeval::StatsInputs in;
    if (!metric.empty()) in.metric_csv = metric;
    if (!human.empty()) in.human_csv = human;
    if (!votes.empty()) in.votes_csv = votes;
    if (!mode.empty()) in.mode = capeval::stats::elo_mode_from_string(mode);
    return capeval::cmd_stats(in, cfg, opts);
  } catch (const std::exception& e) {
    std::cerr << "capeval: " << e.what() << "\n";
    return capeval::exit_code_for(std::current_exception());
  }
}
