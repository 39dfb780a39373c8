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

#include <cmath>
#include <random>

#include "capeval/metricstats.hpp"
#include "support/oracles.hpp"

namespace capeval::stats {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Values drawn from a small grid so ties are common.
VectorXd tied_vector(int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> level(0, 4);
  return VectorXd::NullaryExpr(n, [&] { return 0.25 * level(rng); });
}

TEST(Correlation, HandValues) {
  const VectorXd x = vec({1, 2, 3, 4, 5});
  EXPECT_NEAR(pearson(x, vec({2, 4, 6, 8, 10})), 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, vec({5, 4, 3, 2, 1})), -1.0, 1e-15);
  EXPECT_NEAR(kendall_tau(x, vec({1, 3, 2, 5, 4})), 0.6, 1e-15);
  EXPECT_NEAR(spearman(x, vec({1, 3, 2, 5, 4})), 0.8, 1e-15);
  EXPECT_NEAR(spearman(x, vec({1, 4, 9, 16, 25})), 1.0, 1e-15);
}

TEST(Correlation, KendallTauBWithTies) {
  // scipy.stats.kendalltau([1,2,2,3],[1,3,2,2]) = 0.4
  EXPECT_NEAR(kendall_tau(vec({1, 2, 2, 3}), vec({1, 3, 2, 2})), 0.4, 1e-12);
}

TEST(Correlation, AverageRanks) {
  EXPECT_EQ(average_ranks(vec({10, 20, 20, 5})), vec({2, 3.5, 3.5, 1}));
}

TEST(Correlation, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = std::uniform_int_distribution<int>(3, 40)(rng);
    const VectorXd x = tied_vector(n, rng);
    const VectorXd y = tied_vector(n, rng);
    if ((x.array() == x(0)).all() || (y.array() == y(0)).all()) continue;
    ASSERT_NEAR(pearson(x, y), oracle::pearson(to_std(x), to_std(y)), 1e-12);
    ASSERT_NEAR(kendall_tau(x, y), oracle::kendall_tau_b(to_std(x), to_std(y)), 1e-12);
    ASSERT_NEAR(spearman(x, y), oracle::spearman(to_std(x), to_std(y)), 1e-12);
  }
}

TEST(Correlation, DegenerateInputs) {
  EXPECT_THROW(pearson(vec({1, 1, 1}), vec({1, 2, 3})), DegenerateInput);
  EXPECT_THROW(pearson(vec({1, 2}), vec({1, 2, 3})), DegenerateInput);
  EXPECT_THROW(kendall_tau(vec({1}), vec({1})), DegenerateInput);
  EXPECT_THROW(kendall_tau(vec({2, 2, 2}), vec({1, 2, 3})), DegenerateInput);
}

TEST(OneMinusR2, Values) {
  const VectorXd h = vec({1, 2, 3, 4});
  EXPECT_EQ(one_minus_r2(h, h), 0.0);
  // mean predictor explains nothing
  EXPECT_NEAR(one_minus_r2(VectorXd::Constant(4, 2.5), h), 1.0, 1e-15);
  EXPECT_NEAR(one_minus_r2(vec({1, 2, 3, 5}), h), 1.0 / 5.0, 1e-15);
  EXPECT_THROW(one_minus_r2(h, VectorXd::Constant(4, 1.0)), DegenerateInput);
}

TEST(SampleTau, SkipsHumanTiesAndCountsMetricTiesAsZero) {
  MatrixXd metric(3, 3), human(3, 3);
  metric << 1, 2, 3,  //
      5, 5, 5,        //
      3, 2, 1;
  human << 1, 2, 3,  //
      1, 2, 3,       //
      4, 4, 4;
  const auto d = per_sample_tau_detail(metric, human);
  EXPECT_EQ(d.n_used, 2u);
  EXPECT_EQ(d.n_skipped, 1u);
  EXPECT_NEAR(d.mean, 0.5, 1e-15);
  MatrixXd all_tied = MatrixXd::Ones(2, 3);
  EXPECT_THROW(per_sample_tau(metric.topRows(2), all_tied), NoValidSamples);
  EXPECT_THROW(per_sample_tau(metric, human.leftCols(2)), DegenerateInput);
}

// ---------------------------------------------------------------------------
// Ratings

Vote vote(std::string a, std::string b, Outcome o) { return {"s", std::move(a), std::move(b), o}; }

TEST(Elo, OnlineHandValues) {
  const auto r = elo_ratings({vote("A", "B", Outcome::kA)}, EloMode::kOnline);
  EXPECT_DOUBLE_EQ(r.at("A"), 1016.0);
  EXPECT_DOUBLE_EQ(r.at("B"), 984.0);
  const auto t = elo_ratings({vote("A", "B", Outcome::kTie)}, EloMode::kOnline);
  EXPECT_DOUBLE_EQ(t.at("A"), 1000.0);
  // Second game: A (1016) vs B (984), B wins.
  const auto two = elo_ratings({vote("A", "B", Outcome::kA), vote("A", "B", Outcome::kB)},
                               EloMode::kOnline);
  const double e = 1.0 / (1.0 + std::pow(10.0, -32.0 / 400.0));
  EXPECT_NEAR(two.at("A"), 1016.0 - 32.0 * e, 1e-12);
  EXPECT_NEAR(two.at("A") + two.at("B"), 2000.0, 1e-12);
}

TEST(Elo, BradleyTerryClosedForm) {
  std::vector<Vote> votes = {vote("A", "B", Outcome::kA), vote("A", "B", Outcome::kA),
                             vote("B", "A", Outcome::kB), vote("A", "B", Outcome::kB)};
  EloOptions opts;
  opts.prior_games = 0.0;
  const auto r = elo_ratings(votes, EloMode::kBradleyTerry, opts);
  const double gap = 400.0 * std::log10(3.0);
  EXPECT_NEAR(r.at("A") - r.at("B"), gap, 1e-6);
  EXPECT_NEAR(r.at("A") + r.at("B"), 2000.0, 1e-9);
}

TEST(Elo, BradleyTerryStationary) {
  // With no prior, wins_i = sum_j n_ij p_i / (p_i + p_j) at the optimum.
  std::mt19937_64 rng(22);
  const std::vector<double> strength = {1, 2, 4, 8, 3};
  const auto synthetic = oracle::bt_votes(strength, 400, rng);
  std::vector<Vote> votes;
  for (const auto& v : synthetic) {
    votes.push_back(vote("s" + std::to_string(v.a), "s" + std::to_string(v.b),
                         v.a_wins ? Outcome::kA : Outcome::kB));
  }
  EloOptions opts;
  opts.prior_games = 0.0;
  const auto r = elo_ratings(votes, EloMode::kBradleyTerry, opts);
  const double per_unit = std::log(10.0) / 400.0;
  std::map<std::string, double> p, wins, expected;
  for (const auto& [name, rating] : r) p[name] = std::exp(per_unit * (rating - 1000.0));
  for (const auto& v : votes) {
    const double pa = p[v.system_a], pb = p[v.system_b];
    wins[v.outcome == Outcome::kA ? v.system_a : v.system_b] += 1.0;
    expected[v.system_a] += pa / (pa + pb);
    expected[v.system_b] += pb / (pa + pb);
  }
  for (const auto& [name, w] : wins) EXPECT_NEAR(w, expected[name], 1e-5) << name;
}

TEST(Elo, UndefeatedSystemStaysFiniteWithPrior) {
  const std::vector<Vote> votes = {vote("A", "B", Outcome::kA), vote("A", "B", Outcome::kA)};
  const auto r = elo_ratings(votes, EloMode::kBradleyTerry);
  EXPECT_TRUE(std::isfinite(r.at("A")));
  EXPECT_GT(r.at("A"), r.at("B"));
  EloOptions no_prior;
  no_prior.prior_games = 0.0;
  EXPECT_THROW(elo_ratings(votes, EloMode::kBradleyTerry, no_prior), DegenerateInput);
}

TEST(Elo, RecoversOrdering) {
  std::mt19937_64 rng(23);
  const std::vector<double> strength = {1, 3, 9, 27};
  int correct = 0;
  for (int seed = 0; seed < 20; ++seed) {
    std::vector<Vote> votes;
    for (const auto& v : oracle::bt_votes(strength, 1000, rng)) {
      votes.push_back(vote("s" + std::to_string(v.a), "s" + std::to_string(v.b),
                           v.a_wins ? Outcome::kA : Outcome::kB));
    }
    const auto r = elo_ratings(votes, EloMode::kBradleyTerry);
    correct += (r.at("s0") < r.at("s1") && r.at("s1") < r.at("s2") && r.at("s2") < r.at("s3"));
  }
  EXPECT_GE(correct, 19);
}

TEST(Elo, Errors) {
  EXPECT_THROW(elo_ratings({}, EloMode::kOnline), EmptyInput);
  EXPECT_THROW(elo_ratings({vote("A", "A", Outcome::kA)}, EloMode::kOnline), DegenerateInput);
  EXPECT_EQ(elo_mode_from_string("bt"), EloMode::kBradleyTerry);
  EXPECT_EQ(elo_mode_from_string("online-elo"), EloMode::kOnline);
  EXPECT_THROW(elo_mode_from_string("glicko"), UsageError);
  EXPECT_EQ(outcome_from_string("tie"), Outcome::kTie);
  EXPECT_THROW(outcome_from_string("draw?"), UsageError);
}

TEST(Elo, JsonRanking) {
  const auto j = ratings_to_json({{"A", 900.0}, {"B", 1100.0}}, EloMode::kOnline);
  EXPECT_EQ(j["mode"], "online-elo");
  EXPECT_DOUBLE_EQ(j["ratings"]["B"].get<double>(), 1100.0);
}

}  // namespace
}  // namespace capeval::stats
