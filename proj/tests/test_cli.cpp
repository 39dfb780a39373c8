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

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "capeval/commands.hpp"
#include "capeval/config.hpp"
#include "capeval/dataset_io.hpp"
#include "capeval/error.hpp"
#include "capeval/feedquill.hpp"
#include "capeval/templates.hpp"
#include "support/test_util.hpp"

namespace capeval {
namespace {

namespace fs = std::filesystem;

fs::path score_dir() { return testutil::fixtures_dir() / "score"; }
fs::path prefgen_dir() { return testutil::fixtures_dir() / "prefgen"; }

CommandOptions offline_to(const fs::path& out) {
  CommandOptions o;
  o.out_dir = out;
  o.offline = true;
  return o;
}

std::vector<nlohmann::json> read_reports(const fs::path& dir) {
  return io::read_jsonl(dir / "reports.jsonl");
}

double f1(double p, double r) { return 2 * p * r / (p + r); }

// ---------------------------------------------------------------------------
// score

TEST(Score, FixtureMatchesHandValues) {
  testutil::TempDir out;
  const auto cfg = load_config(score_dir() / "config.json");
  ASSERT_EQ(cmd_score(score_dir() / "samples.jsonl", score_dir() / "oracles.jsonl", cfg,
                      offline_to(out.path())),
            exit_codes::kOk);
  const auto reports = read_reports(out.path());
  ASSERT_EQ(reports.size(), 5u);
  struct Hand {
    const char* id;
    double p, r, p_desc, r_desc;
  };
  const Hand hand[] = {{"s1", 0.75, 0.8, 0.75, 0.8},
                       {"s2", 0.75, 0.5, 1.0, 0.5},
                       {"s3", 0.5, 0.6, 0.5, 0.6},
                       {"s4", 1.0, 0.4, 1.0, 0.5},
                       {"s5", 1.0, 0.8, 1.0, 0.8}};
  double total = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& r = reports[i];
    const auto& h = hand[i];
    SCOPED_TRACE(h.id);
    EXPECT_EQ(r["sample_id"], h.id);
    EXPECT_NEAR(r["s_p"].get<double>(), h.p, 1e-12);
    EXPECT_NEAR(r["s_r"].get<double>(), h.r, 1e-12);
    EXPECT_NEAR(r["s_p_desc"].get<double>(), h.p_desc, 1e-12);
    EXPECT_NEAR(r["s_r_desc"].get<double>(), h.r_desc, 1e-12);
    const double final_f = (f1(h.p, h.r) + f1(h.p_desc, h.r_desc)) / 2;
    EXPECT_NEAR(r["final_f"].get<double>(), final_f, 1e-12);
    total += final_f;
  }
  const auto summary = nlohmann::json::parse(testutil::slurp(out.path() / "summary.json"));
  EXPECT_EQ(summary["n_scored"], 5);
  EXPECT_NEAR(summary["overall"]["final_f"].get<double>(), total / 5, 1e-12);
  EXPECT_EQ(summary["systems"]["sysA"]["n_samples"], 3);
  EXPECT_EQ(summary["systems"]["sysB"]["n_samples"], 2);
}

TEST(Score, DeterministicAcrossRunsAndParallelism) {
  testutil::TempDir a, b;
  auto cfg = load_config(score_dir() / "config.json");
  cmd_score(score_dir() / "samples.jsonl", score_dir() / "oracles.jsonl", cfg,
            offline_to(a.path()));
  cfg.score.max_parallel_samples = 1;
  cmd_score(score_dir() / "samples.jsonl", score_dir() / "oracles.jsonl", cfg,
            offline_to(b.path()));
  EXPECT_EQ(testutil::slurp(a.path() / "reports.jsonl"),
            testutil::slurp(b.path() / "reports.jsonl"));
  EXPECT_EQ(testutil::slurp(a.path() / "summary.json"),
            testutil::slurp(b.path() / "summary.json"));
}

TEST(Score, WarmCacheAvoidsTransport) {
  testutil::TempDir out, cache;
  auto cfg = load_config(score_dir() / "config.json");
  cfg.cache_dir = cache.path();
  cmd_score(score_dir() / "samples.jsonl", score_dir() / "oracles.jsonl", cfg,
            offline_to(out.path() / "cold"));
  // Second run replays only from the cache: the fixture directory is gone.
  cfg.backends[0].fixture_dir = out.path() / "no-such-dir";
  ASSERT_EQ(cmd_score(score_dir() / "samples.jsonl", score_dir() / "oracles.jsonl", cfg,
                      offline_to(out.path() / "warm")),
            exit_codes::kOk);
  EXPECT_EQ(testutil::slurp(out.path() / "cold" / "reports.jsonl"),
            testutil::slurp(out.path() / "warm" / "reports.jsonl"));
}

TEST(Score, UsageAndOracleErrors) {
  testutil::TempDir dir;
  const auto cfg = load_config(score_dir() / "config.json");
  testutil::spit(dir.path() / "empty.jsonl", "");
  EXPECT_THROW(cmd_score(dir.path() / "empty.jsonl", score_dir() / "oracles.jsonl", cfg,
                         offline_to(dir.path())),
               UsageError);
  testutil::spit(dir.path() / "one.jsonl",
                 R"({"sample_id":"zz","prompt":"p","caption":"A cat.","system_tag":"x"})" "\n");
  try {
    cmd_score(dir.path() / "one.jsonl", score_dir() / "oracles.jsonl", cfg, offline_to(dir.path()));
    FAIL() << "expected MissingOracle";
  } catch (const MissingOracle& e) {
    EXPECT_NE(std::string(e.what()).find("zz"), std::string::npos);
  }
}

TEST(Score, PartialFailureReturnsTwo) {
  testutil::TempDir dir;
  // s1 from the fixture plus a sample whose prompts have no recorded replies.
  const auto lines = io::read_jsonl(score_dir() / "samples.jsonl");
  std::string text = lines[0].dump() + "\n" +
                     R"({"sample_id":"s2","prompt":"p","caption":"Unrecorded caption.","system_tag":"sysB"})" "\n";
  testutil::spit(dir.path() / "samples.jsonl", text);
  const auto cfg = load_config(score_dir() / "config.json");
  EXPECT_EQ(cmd_score(dir.path() / "samples.jsonl", score_dir() / "oracles.jsonl", cfg,
                      offline_to(dir.path() / "out")),
            exit_codes::kPartial);
  const auto summary = nlohmann::json::parse(testutil::slurp(dir.path() / "out" / "summary.json"));
  EXPECT_EQ(summary["n_scored"], 1);
  EXPECT_EQ(summary["skipped"].size(), 1u);
}

// ---------------------------------------------------------------------------
// prefgen and align

TEST(Prefgen, FixtureCountsAndScores) {
  testutil::TempDir out;
  const auto cfg = load_config(prefgen_dir() / "config.json");
  ASSERT_EQ(cmd_prefgen(prefgen_dir() / "samples.jsonl", cfg, offline_to(out.path())),
            exit_codes::kOk);
  const auto precision = read_pairs_jsonl(out.path() / "d_precision.jsonl");
  const auto richness = read_pairs_jsonl(out.path() / "d_richness.jsonl");
  EXPECT_EQ(precision.size(), 5u);
  EXPECT_EQ(richness.size(), 5u);
  for (const auto& p : precision) EXPECT_GT(p.preferred_score, p.rejected_score);
  for (const auto& p : richness) EXPECT_EQ(p.channel, Channel::kRichness);
  // The sample without a prompt receives one from the built-in pool.
  const auto& pool = default_caption_prompts();
  const std::string& assigned = pick_prompt(pool, "p2", cfg.seed);
  bool pooled = false;
  for (const auto& p : precision) pooled |= p.context.sample_id == "p2" && p.context.prompt == assigned;
  EXPECT_TRUE(pooled);
}

TEST(Prefgen, MarginFiltersPairs) {
  testutil::TempDir out;
  auto cfg = load_config(prefgen_dir() / "config.json");
  cfg.prefgen.min_margin = 0.1;
  cmd_prefgen(prefgen_dir() / "samples.jsonl", cfg, offline_to(out.path()));
  EXPECT_EQ(read_pairs_jsonl(out.path() / "d_precision.jsonl").size(), 4u);
}

TEST(Prefgen, TooFewCandidates) {
  testutil::TempDir out;
  auto cfg = load_config(prefgen_dir() / "config.json");
  cfg.prefgen.n_candidates = 1;
  EXPECT_THROW(cmd_prefgen(prefgen_dir() / "samples.jsonl", cfg, offline_to(out.path())),
               UsageError);
}

TEST(PickPrompt, DeterministicAndSeeded) {
  const auto& pool = default_caption_prompts();
  EXPECT_EQ(&pick_prompt(pool, "a", 0), &pick_prompt(pool, "a", 0));
  int differ = 0;
  for (int seed = 0; seed < 20; ++seed) differ += &pick_prompt(pool, "a", seed) != &pick_prompt(pool, "a", 0);
  EXPECT_GT(differ, 0);
}

RunConfig align_config() {
  return config_from_json(nlohmann::json::parse(R"({
      "seed": 3,
      "align": {"vocab_size": 8, "max_len": 6, "steps": 15, "eval_samples": 64,
                "rm": {"epochs": 3},
                "ppo": {"lr_actor": 0.01, "lr_critic": 0.05, "batch_size": 32}}})"),
                          ".");
}

TEST(Align, RunsOnPrefgenOutput) {
  testutil::TempDir dir;
  const auto pcfg = load_config(prefgen_dir() / "config.json");
  cmd_prefgen(prefgen_dir() / "samples.jsonl", pcfg, offline_to(dir.path()));
  const auto cfg = align_config();
  ASSERT_EQ(cmd_align(dir.path() / "d_precision.jsonl", dir.path() / "d_richness.jsonl", cfg,
                      offline_to(dir.path() / "align")),
            exit_codes::kOk);
  const fs::path out = dir.path() / "align";
  std::istringstream curve(testutil::slurp(out / "ppo_curve.csv"));
  std::string line;
  std::getline(curve, line);
  EXPECT_EQ(line, "step,mean_reward,mean_kl,clip_frac,actor_loss,critic_loss");
  int rows = 0;
  while (std::getline(curve, line)) ++rows;
  EXPECT_EQ(rows, 15);
  const auto snapshot = nlohmann::json::parse(testutil::slurp(out / "config_snapshot.json"));
  EXPECT_EQ(snapshot["seed"], 3);
  EXPECT_EQ(snapshot["align"]["steps"], 15);
  const auto rm = nlohmann::json::parse(testutil::slurp(out / "rm_precision.json"));
  EXPECT_EQ(rm["weights"].size(), 9u);
  const auto summary = nlohmann::json::parse(testutil::slurp(out / "align_summary.json"));
  EXPECT_DOUBLE_EQ(summary["initial"]["mean_kl"].get<double>(), 0.0);

  // Same seed, same curve.
  ASSERT_EQ(cmd_align(dir.path() / "d_precision.jsonl", dir.path() / "d_richness.jsonl", cfg,
                      offline_to(dir.path() / "again")),
            exit_codes::kOk);
  EXPECT_EQ(testutil::slurp(out / "ppo_curve.csv"),
            testutil::slurp(dir.path() / "again" / "ppo_curve.csv"));
}

TEST(Align, MissingOrEmptyChannel) {
  testutil::TempDir dir;
  testutil::spit(dir.path() / "empty.jsonl", "");
  try {
    cmd_align(dir.path() / "nope.jsonl", dir.path() / "empty.jsonl", align_config(),
              offline_to(dir.path()));
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("precision"), std::string::npos);
  }
  EXPECT_THROW(cmd_align(dir.path() / "empty.jsonl", dir.path() / "empty.jsonl", align_config(),
                         offline_to(dir.path())),
               NoPairsForChannel);
}

// ---------------------------------------------------------------------------
// stats

TEST(Stats, CorrelationsAndRatings) {
  testutil::TempDir dir;
  testutil::spit(dir.path() / "metric.csv",
                 "sample_id,system_tag,score\n"
                 "a,x,0.1\na,y,0.4\nb,x,0.5\nb,y,0.3\nc,x,0.2\nc,y,0.9\n");
  testutil::spit(dir.path() / "human.csv",
                 "sample_id,system_tag,score\n"
                 "a,x,1\na,y,2\nb,x,3\nb,y,3\nc,x,1\nc,y,4\n");
  testutil::spit(dir.path() / "votes.csv",
                 "sample_id,system_a,system_b,outcome\n"
                 "a,x,y,b\nb,x,y,a\nc,x,y,b\nd,y,x,a\n");
  const StatsInputs in{dir.path() / "metric.csv", dir.path() / "human.csv",
                       dir.path() / "votes.csv", stats::EloMode::kOnline};
  ASSERT_EQ(cmd_stats(in, RunConfig{}, offline_to(dir.path())), exit_codes::kOk);
  const auto j = nlohmann::json::parse(testutil::slurp(dir.path() / "stats.json"));
  EXPECT_EQ(j["correlation"]["n"], 6);
  // Row b has tied human scores and is skipped; rows a and c agree.
  EXPECT_DOUBLE_EQ(j["correlation"]["sample_tau"]["mean"].get<double>(), 1.0);
  EXPECT_EQ(j["correlation"]["sample_tau"]["n_skipped_tied"], 1);
  EXPECT_EQ(j["ratings"]["mode"], "online-elo");
  EXPECT_EQ(j["ratings"]["ranking"][0], "y");
  EXPECT_EQ(j["ratings"]["n_votes"], 4);
}

TEST(Stats, IdMismatchListsOffenders) {
  testutil::TempDir dir;
  testutil::spit(dir.path() / "metric.csv", "sample_id,score\na,1\nb,2\nc,3\n");
  testutil::spit(dir.path() / "human.csv", "sample_id,score\na,1\nb,2\nd,3\n");
  try {
    cmd_stats({dir.path() / "metric.csv", dir.path() / "human.csv", std::nullopt, std::nullopt},
              RunConfig{}, offline_to(dir.path()));
    FAIL() << "expected IdMismatch";
  } catch (const IdMismatch& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("c (metric only)"), std::string::npos);
    EXPECT_NE(what.find("d (human only)"), std::string::npos);
  }
  EXPECT_THROW(cmd_stats({dir.path() / "metric.csv", std::nullopt, std::nullopt, std::nullopt},
                         RunConfig{}, offline_to(dir.path())),
               UsageError);
}

// ---------------------------------------------------------------------------
// config

TEST(Config, InterpolationAndStrictKeys) {
  ::setenv("CAPEVAL_TEST_MODEL", "vlm-1", 1);
  EXPECT_EQ(interpolate_env("model ${CAPEVAL_TEST_MODEL}!"), "model vlm-1!");
  ::unsetenv("CAPEVAL_TEST_UNSET");
  EXPECT_THROW(interpolate_env("${CAPEVAL_TEST_UNSET}"), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"bogus": 1})"), "."), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"score": {"decomposr": "x"}})"), "."),
               ConfigError);
}

TEST(Config, SingleBackendDefaultsAndOverride) {
  auto cfg = config_from_json(nlohmann::json::parse(R"({"backends": [
      {"name": "only", "kind": "mock-fixture", "fixture_dir": "fx"}]})"),
                              "/base");
  EXPECT_EQ(cfg.score.decomposer, "only");
  EXPECT_EQ(cfg.prefgen.ensemble, std::vector<std::string>{"only"});
  EXPECT_EQ(cfg.backends[0].fixture_dir, fs::path("/base/fx"));
  auto two = load_config(prefgen_dir() / "config.json");
  apply_backend_override(two, "judge");
  EXPECT_EQ(two.prefgen.generator, "judge");
  EXPECT_EQ(two.prefgen.ensemble, std::vector<std::string>{"judge"});
  EXPECT_THROW(apply_backend_override(two, "nobody"), ConfigError);
}

TEST(ExitCodes, Mapping) {
  auto code = [](auto e) { return exit_code_for(std::make_exception_ptr(e)); };
  EXPECT_EQ(code(NetworkError("x")), exit_codes::kBackend);
  EXPECT_EQ(code(FixtureMissing("b", "k")), exit_codes::kBackend);
  EXPECT_EQ(code(JsonParseError("x", "raw")), exit_codes::kBackend);
  EXPECT_EQ(code(UsageError("x")), exit_codes::kUsage);
  EXPECT_EQ(code(ConfigError("x")), exit_codes::kUsage);
}

// ---------------------------------------------------------------------------
// The executable

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CAPEVAL_TEST_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Executable, ExitCodes) {
  testutil::TempDir dir;
  const std::string cfg = (score_dir() / "config.json").string();
  const std::string samples = (score_dir() / "samples.jsonl").string();
  const std::string oracles = (score_dir() / "oracles.jsonl").string();
  const std::string out = dir.path().string();
  EXPECT_EQ(run_cli("--offline --config " + cfg + " --out " + out + " score " + samples + " " +
                    oracles),
            0);
  EXPECT_TRUE(fs::exists(dir.path() / "summary.json"));
  EXPECT_EQ(run_cli("--no-such-flag"), 1);
  EXPECT_EQ(run_cli("--offline --config " + cfg + " --out " + out + " score " + out +
                    "/missing.jsonl " + oracles),
            1);
  // Prompts differ from the recorded ones, so every sample lacks a fixture.
  testutil::spit(dir.path() / "new.jsonl",
                 R"({"sample_id":"s1","prompt":"p","caption":"Never recorded.","system_tag":"x"})" "\n");
  EXPECT_EQ(run_cli("--offline --config " + cfg + " --out " + out + " score " + out +
                    "/new.jsonl " + oracles),
            3);
}

}  // namespace
}  // namespace capeval
