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

#include "capeval/metricstats.hpp"

#include <cmath>
#include <set>

namespace capeval::stats {

EloMode elo_mode_from_string(const std::string& s) {
  if (s == "online-elo" || s == "online") return EloMode::kOnline;
  if (s == "bradley-terry" || s == "bt") return EloMode::kBradleyTerry;
  throw UsageError("unknown rating mode '" + s + "'");
}

std::string to_string(EloMode mode) {
  return mode == EloMode::kOnline ? "online-elo" : "bradley-terry";
}

Outcome outcome_from_string(const std::string& s) {
  if (s == "a") return Outcome::kA;
  if (s == "b") return Outcome::kB;
  if (s == "tie") return Outcome::kTie;
  throw UsageError("vote outcome must be a, b or tie, got '" + s + "'");
}

namespace {

double score_for_a(Outcome o) {
  switch (o) {
    case Outcome::kA: return 1.0;
    case Outcome::kB: return 0.0;
    case Outcome::kTie: return 0.5;
  }
  return 0.5;
}

Ratings online(const std::vector<Vote>& votes, const std::set<std::string>& systems,
               const EloOptions& opt) {
  Ratings r;
  for (const auto& s : systems) r[s] = opt.initial;
  for (const auto& v : votes) {
    double& ra = r[v.system_a];
    double& rb = r[v.system_b];
    const double expected_a = 1.0 / (1.0 + std::pow(10.0, (rb - ra) / opt.scale));
    const double delta = opt.k_factor * (score_for_a(v.outcome) - expected_a);
    ra += delta;
    rb -= delta;
  }
  return r;
}

// Minorization-maximization for Bradley-Terry strengths (Hunter 2004), ties
// split as half a win to each side.
Ratings bradley_terry(const std::vector<Vote>& votes,
                      const std::set<std::string>& systems, const EloOptions& opt) {
  const std::vector<std::string> names(systems.begin(), systems.end());
  const auto n = static_cast<Eigen::Index>(names.size());
  std::map<std::string, Eigen::Index> index;
  for (Eigen::Index i = 0; i < n; ++i) index[names[static_cast<std::size_t>(i)]] = i;

  Eigen::MatrixXd games = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd wins = Eigen::VectorXd::Constant(n, opt.prior_games);
  for (const auto& v : votes) {
    const auto a = index.at(v.system_a);
    const auto b = index.at(v.system_b);
    games(a, b) += 1.0;
    games(b, a) += 1.0;
    const double sa = score_for_a(v.outcome);
    wins(a) += sa;
    wins(b) += 1.0 - sa;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (wins(i) <= 0.0) {
      throw DegenerateInput("system '" + names[static_cast<std::size_t>(i)] +
                            "' never scores; enable prior_games for finite ratings");
    }
  }

  const double to_rating = opt.scale / std::log(10.0);
  Eigen::VectorXd p = Eigen::VectorXd::Ones(n);
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    Eigen::VectorXd next(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double denom = 2.0 * opt.prior_games / (p(i) + 1.0);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i && games(i, j) > 0.0) denom += games(i, j) / (p(i) + p(j));
      }
      next(i) = wins(i) / denom;
    }
    if (opt.prior_games <= 0.0) next /= std::exp(next.array().log().mean());
    const double change =
        to_rating * (next.array().log() - p.array().log()).abs().maxCoeff();
    p = next;
    if (change < opt.tolerance) break;
  }

  const Eigen::ArrayXd log_p = p.array().log();
  const double mean_log = log_p.mean();
  Ratings out;
  for (Eigen::Index i = 0; i < n; ++i) {
    out[names[static_cast<std::size_t>(i)]] = opt.initial + to_rating * (log_p(i) - mean_log);
  }
  return out;
}

}  // namespace

Ratings elo_ratings(const std::vector<Vote>& votes, EloMode mode, const EloOptions& options) {
  if (votes.empty()) throw EmptyInput("no votes");
  std::set<std::string> systems;
  for (const auto& v : votes) {
    if (v.system_a == v.system_b) {
      throw DegenerateInput("vote compares '" + v.system_a + "' with itself");
    }
    systems.insert(v.system_a);
    systems.insert(v.system_b);
  }
  if (systems.size() < 2) throw SingleSystem("ratings need at least two systems");
  return mode == EloMode::kOnline ? online(votes, systems, options)
                                  : bradley_terry(votes, systems, options);
}

nlohmann::ordered_json ratings_to_json(const Ratings& ratings, EloMode mode) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(mode);
  j["ratings"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : ratings) j["ratings"][name] = value;
  return j;
}

}  // namespace capeval::stats
