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

#include <map>
#include <random>
#include <set>

#include "capeval/error.hpp"
#include "capeval/feedquill.hpp"
#include "capeval/verifier.hpp"
#include "support/test_util.hpp"

namespace capeval {
namespace {

CandidateScore cand(std::size_t index, double c_p, std::size_t c_r) {
  CandidateScore s;
  s.candidate_index = index;
  s.c_p = c_p;
  s.c_r = c_r;
  return s;
}

std::set<std::pair<std::size_t, std::size_t>> as_set(const std::vector<RankedPair>& pairs) {
  std::set<std::pair<std::size_t, std::size_t>> out;
  for (const auto& p : pairs) out.emplace(p.preferred, p.rejected);
  return out;
}

TEST(CandidateScore, FromVerdicts) {
  const auto s = candidate_score_from_verdicts(2, {true, true, false});
  EXPECT_NEAR(s.c_p, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(s.c_r, 3u);
  EXPECT_EQ(s.candidate_index, 2u);
  EXPECT_FALSE(s.degenerate);
  const auto e = candidate_score_from_verdicts(0, {});
  EXPECT_TRUE(e.degenerate);
  EXPECT_DOUBLE_EQ(e.c_p, 0.0);
  EXPECT_EQ(e.c_r, 0u);
}

TEST(BuildPairs, RichnessTiesExcluded) {
  const std::vector<CandidateScore> scores = {cand(0, 1, 9), cand(1, 1, 4), cand(2, 1, 4)};
  const auto pairs = build_pairs(scores, Channel::kRichness);
  EXPECT_EQ(as_set(pairs), (std::set<std::pair<std::size_t, std::size_t>>{{0, 1}, {0, 2}}));
  for (const auto& p : pairs) {
    EXPECT_DOUBLE_EQ(p.margin, 5.0);
    EXPECT_DOUBLE_EQ(p.preferred_score, 9.0);
  }
}

TEST(BuildPairs, PrecisionMarginThreshold) {
  const std::vector<CandidateScore> scores = {cand(0, 2.0 / 3.0, 3), cand(1, 0.0, 2),
                                              cand(2, 0.6, 5)};
  EXPECT_EQ(as_set(build_pairs(scores, Channel::kPrecision)),
            (std::set<std::pair<std::size_t, std::size_t>>{{0, 1}, {2, 1}, {0, 2}}));
  EXPECT_EQ(as_set(build_pairs(scores, Channel::kPrecision, PairOptions{0.1, std::nullopt})),
            (std::set<std::pair<std::size_t, std::size_t>>{{0, 1}, {2, 1}}));
}

TEST(BuildPairs, GapEqualToMarginExcluded) {
  const std::vector<CandidateScore> scores = {cand(0, 0.5, 1), cand(1, 0.25, 1)};
  EXPECT_TRUE(build_pairs(scores, Channel::kPrecision, PairOptions{0.25, std::nullopt}).empty());
  EXPECT_EQ(build_pairs(scores, Channel::kPrecision, PairOptions{0.2, std::nullopt}).size(), 1u);
}

TEST(BuildPairs, PrecisionFloorOnlyAffectsRichness) {
  const std::vector<CandidateScore> scores = {cand(0, 0.4, 8), cand(1, 0.9, 3), cand(2, 1.0, 5)};
  const PairOptions floor{0.0, 0.5};
  EXPECT_EQ(as_set(build_pairs(scores, Channel::kRichness, floor)),
            (std::set<std::pair<std::size_t, std::size_t>>{{2, 1}}));
  EXPECT_EQ(build_pairs(scores, Channel::kPrecision, floor).size(), 3u);
}

TEST(BuildPairs, AllEqualAndTooFew) {
  const std::vector<CandidateScore> equal = {cand(0, 1, 2), cand(1, 1, 2), cand(2, 1, 2)};
  EXPECT_TRUE(build_pairs(equal, Channel::kPrecision).empty());
  EXPECT_TRUE(build_pairs(equal, Channel::kRichness).empty());
  const std::vector<CandidateScore> one = {cand(0, 1, 2)};
  EXPECT_THROW(build_pairs(one, Channel::kPrecision), TooFewCandidates);
}

TEST(BuildPairs, PreferredAlwaysScoresHigher) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<CandidateScore> scores;
    const int n = std::uniform_int_distribution<int>(2, 6)(rng);
    for (int i = 0; i < n; ++i) {
      const int units = std::uniform_int_distribution<int>(0, 6)(rng);
      std::vector<bool> v;
      for (int u = 0; u < units; ++u) v.push_back(std::bernoulli_distribution(0.6)(rng));
      scores.push_back(candidate_score_from_verdicts(static_cast<std::size_t>(i), v));
    }
    for (const auto ch : {Channel::kPrecision, Channel::kRichness}) {
      std::size_t expected = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          expected += scores[i].channel_score(ch) != scores[j].channel_score(ch) ? 1 : 0;
        }
      }
      const auto pairs = build_pairs(scores, ch);
      ASSERT_EQ(pairs.size(), expected);
      for (const auto& p : pairs) {
        ASSERT_GT(scores[p.preferred].channel_score(ch), scores[p.rejected].channel_score(ch));
      }
    }
  }
}

TEST(PairsJsonl, RoundTrip) {
  testutil::TempDir dir;
  PreferencePair p;
  p.context.sample_id = "p1";
  p.context.prompt = "Describe.";
  p.context.image_ref = "img/p1.png";
  p.preferred = "A red cat.";
  p.rejected = "A dog.";
  p.channel = Channel::kRichness;
  p.margin = 2;
  p.preferred_score = 5;
  p.rejected_score = 3;
  const std::vector<PreferencePair> pairs = {p};
  write_pairs_jsonl(dir.path() / "d.jsonl", pairs);
  const auto back = read_pairs_jsonl(dir.path() / "d.jsonl");
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].context.image_ref, p.context.image_ref);
  EXPECT_EQ(back[0].preferred, p.preferred);
  EXPECT_EQ(back[0].channel, Channel::kRichness);
  EXPECT_DOUBLE_EQ(back[0].margin, 2.0);
  EXPECT_THROW(channel_from_string("other"), UsageError);
}

// ---------------------------------------------------------------------------
// End-to-end dataset construction with a scripted backend

// Candidate seed -> list of (fact, judged correct).
const std::map<std::int64_t, std::vector<std::pair<std::string, bool>>> kCandidates = {
    {0, {{"c0 f0", true}, {"c0 f1", true}}},
    {1, {{"c1 f0", true}, {"c1 f1", false}, {"c1 f2", false}, {"c1 f3", true}}},
    {2, {{"c2 f0", true}}},
};

std::unique_ptr<Gateway> scripted_gateway() {
  std::vector<BackendSpec> specs;
  for (const char* n : {"gen", "dec", "v1", "v2", "v3"}) {
    BackendSpec s;
    s.name = n;
    s.fixture_dir = "/nonexistent";
    specs.push_back(s);
  }
  GatewayOptions opts;
  opts.transport_override = std::make_shared<CallbackTransport>(
      [](const BackendSpec& b, const ChatRequest& req) -> std::string {
        if (b.name == "gen") return "candidate " + std::to_string(*req.sampling.seed);
        if (b.name == "dec") {
          for (const auto& [seed, facts] : kCandidates) {
            if (req.user.find("candidate " + std::to_string(seed)) == std::string::npos) continue;
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& f : facts) arr.push_back({{"fact", f.first}});
            return arr.dump();
          }
          return "[]";
        }
        bool truth = false;
        for (const auto& [seed, facts] : kCandidates) {
          for (const auto& f : facts) {
            if (req.user.rfind(f.first, 0) == 0) truth = f.second;
          }
        }
        // v3 dissents; the majority of v1 and v2 carries.
        if (b.name == "v3") truth = !truth;
        return truth ? "Yes" : "No";
      });
  return std::make_unique<Gateway>(specs, opts);
}

FeedQuillConfig scripted_config() {
  FeedQuillConfig cfg;
  cfg.generator = "gen";
  cfg.decomposer.backend = "dec";
  cfg.ensemble = {"v1", "v2", "v3"};
  cfg.n_candidates = 3;
  return cfg;
}

TEST(GenerateDataset, ScoresAndPairs) {
  auto gw = scripted_gateway();
  const std::vector<CaptionSample> samples = {{"s1", std::nullopt, "Describe.", "", ""}};
  const auto result = generate_dataset(samples, scripted_config(), *gw, TemplateStore::builtin());
  // c_p = [1, 0.5, 1]; c_r = [2, 4, 1]
  ASSERT_EQ(result.precision_pairs.size(), 2u);
  for (const auto& p : result.precision_pairs) {
    EXPECT_EQ(p.rejected, "candidate 1");
    EXPECT_DOUBLE_EQ(p.margin, 0.5);
    EXPECT_EQ(p.channel, Channel::kPrecision);
  }
  ASSERT_EQ(result.richness_pairs.size(), 3u);
  std::set<std::pair<std::string, std::string>> rich;
  for (const auto& p : result.richness_pairs) rich.emplace(p.preferred, p.rejected);
  EXPECT_EQ(rich, (std::set<std::pair<std::string, std::string>>{
                      {"candidate 1", "candidate 0"},
                      {"candidate 1", "candidate 2"},
                      {"candidate 0", "candidate 2"}}));
  EXPECT_TRUE(result.failed_samples.empty());
}

TEST(GenerateDataset, SampleFailuresAreIsolated) {
  auto gw = scripted_gateway();
  auto cfg = scripted_config();
  cfg.generator = "missing";
  const std::vector<CaptionSample> samples = {{"s1", std::nullopt, "Describe.", "", ""}};
  EXPECT_THROW(generate_dataset(samples, cfg, *gw, TemplateStore::builtin()), ConfigError);
  cfg = scripted_config();
  cfg.n_candidates = 1;
  EXPECT_THROW(generate_dataset(samples, cfg, *gw, TemplateStore::builtin()), TooFewCandidates);
}

}  // namespace
}  // namespace capeval
