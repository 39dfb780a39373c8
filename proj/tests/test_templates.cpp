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

#include <algorithm>

#include "capeval/decomposer.hpp"
#include "capeval/error.hpp"
#include "capeval/matcher.hpp"
#include "capeval/templates.hpp"
#include "capeval/verifier.hpp"
#include "support/test_util.hpp"

namespace capeval {
namespace {

struct GoldenInputs {
  std::string caption;
  std::string reference;
  UnitSet pred;
  OracleSet oracle;
};

GoldenInputs load_inputs() {
  const auto j = nlohmann::json::parse(testutil::slurp(testutil::golden_dir() / "inputs.json"));
  GoldenInputs in;
  in.caption = j["caption"];
  in.reference = j["reference"];
  for (const auto& u : j["pred"]) in.pred.units.push_back(unit_from_json(u));
  std::vector<PrimitiveUnit> oracle;
  for (const auto& u : j["oracle"]) oracle.push_back(unit_from_json(u));
  in.oracle = OracleSet(oracle, in.reference);
  return in;
}

std::string golden(const std::string& name) {
  return testutil::slurp(testutil::golden_dir() / (name + ".golden.txt"));
}

TEST(Goldens, DecompositionPrompt) {
  const auto in = load_inputs();
  EXPECT_EQ(build_decomposition_prompt(in.caption, TemplateStore::builtin()), golden("decompose"));
}

TEST(Goldens, MatchingPrompt) {
  const auto in = load_inputs();
  EXPECT_EQ(build_matching_prompt(in.pred, in.oracle, TemplateStore::builtin()), golden("match"));
}

TEST(Goldens, VerificationPrompt) {
  const auto in = load_inputs();
  EXPECT_EQ(build_verification_prompt(in.pred, in.reference, TemplateStore::builtin()),
            golden("verify"));
}

TEST(Templates, ShippedFilesMatchBuiltins) {
  const auto store = TemplateStore::builtin();
  const std::filesystem::path dir = CAPEVAL_TEST_TEMPLATES_DIR;
  for (const char* id : {template_ids::kDecompose, template_ids::kMatch, template_ids::kVerify,
                         template_ids::kFeedQuillVerify}) {
    EXPECT_EQ(store.get(id), testutil::slurp(dir / (std::string(id) + ".txt"))) << id;
  }
}

TEST(Templates, PlaceholdersPresentOnce) {
  const auto store = TemplateStore::builtin();
  auto count = [](const std::string& s, std::string_view needle) {
    std::size_t n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
    return n;
  };
  EXPECT_EQ(count(store.get(template_ids::kDecompose), placeholders::kCaption), 1u);
  EXPECT_EQ(count(store.get(template_ids::kMatch), placeholders::kPredictedUnits), 1u);
  EXPECT_EQ(count(store.get(template_ids::kMatch), placeholders::kOracleUnits), 1u);
  EXPECT_EQ(count(store.get(template_ids::kVerify), placeholders::kReferenceCaption), 1u);
  EXPECT_EQ(count(store.get(template_ids::kVerify), placeholders::kUnits), 1u);
}

TEST(Templates, FeedQuillPrompt) {
  EXPECT_EQ(build_feedquill_prompt("The cat is red.", TemplateStore::builtin()),
            "The cat is red. Is the statement correct? Please only answer 'yes' or 'no'");
}

TEST(Templates, RenderIsSinglePass) {
  // A substituted value containing another placeholder is not expanded again.
  EXPECT_EQ(render_template("<{A}|{B}>", {{"{A}", "{B}"}, {"{B}", "x"}}), "<{B}|x>");
  EXPECT_THROW(render_template("no slot", {{"{A}", "v"}}), TemplateError);
}

TEST(Templates, OverridesAndUnknownIds) {
  testutil::TempDir dir;
  testutil::spit(dir.path() / "decompose.txt", "Split: {Caption Here}");
  const auto store = TemplateStore::with_overrides(dir.path());
  EXPECT_EQ(build_decomposition_prompt("A cat.", store), "Split: A cat.");
  EXPECT_EQ(store.get(template_ids::kMatch), TemplateStore::builtin().get(template_ids::kMatch));
  EXPECT_THROW(store.get("nope"), TemplateError);
}

TEST(Templates, EmptyCaptionRejected) {
  EXPECT_THROW(build_decomposition_prompt("  \n", TemplateStore::builtin()), EmptyCaption);
}

TEST(CaptionPrompts, PoolShape) {
  const auto& pool = default_caption_prompts();
  EXPECT_EQ(pool.size(), 33u);
  EXPECT_EQ(pool.front(), "What do you see happening in this image?");
  EXPECT_NE(std::find(pool.begin(), pool.end(), "Can you give an in-depth examination of this image?"),
            pool.end());
  for (const auto& p : pool) EXPECT_FALSE(p.empty());
}

}  // namespace
}  // namespace capeval
