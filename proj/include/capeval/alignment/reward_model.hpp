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

#ifndef CAPEVAL_ALIGNMENT_REWARD_MODEL_HPP_
#define CAPEVAL_ALIGNMENT_REWARD_MODEL_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "capeval/alignment/toy_policy.hpp"
#include "capeval/error.hpp"
#include "capeval/feedquill.hpp"

namespace capeval::alignment {

/// Linear scalar reward over sequence features, one per preference channel.
template <typename Scalar>
struct ToyRewardModel {
  Vector<Scalar> weights;
  Channel channel = Channel::kPrecision;

  static ToyRewardModel zeros(Eigen::Index dim, Channel channel) {
    return {Vector<Scalar>::Zero(dim), channel};
  }
  Scalar score(const Vector<Scalar>& features) const {
    return weights.dot(features);
  }
};

template <typename Scalar>
struct FeaturePair {
  Vector<Scalar> preferred;
  Vector<Scalar> rejected;
};

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(Scalar x) {
  return x > Scalar(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
struct LossAndGrad {
  Scalar loss;
  Vector<Scalar> grad;
};

/// Pairwise comparison loss -log sigmoid(r(y+) - r(y-)) and its gradient.
template <typename Scalar>
LossAndGrad<Scalar> rm_loss_and_grad(const ToyRewardModel<Scalar>& model,
                                     const FeaturePair<Scalar>& pair) {
  const Vector<Scalar> diff = pair.preferred - pair.rejected;
  const Scalar margin = model.weights.dot(diff);
  return {softplus(-margin), (-sigmoid(-margin) * diff).eval()};
}

struct RewardTrainingOptions {
  int epochs = 1;
  double learning_rate = 0.5;
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct RewardTrainingResult {
  ToyRewardModel<Scalar> model;
  Scalar mean_loss = 0;  // over training pairs, final parameters
  std::optional<Scalar> heldout_accuracy;
  std::size_t n_train = 0;
  std::size_t n_heldout = 0;
};

/// Fraction of pairs the model orders correctly (ties count as wrong).
template <typename Scalar>
Scalar pairwise_accuracy(const ToyRewardModel<Scalar>& model,
                         const std::vector<FeaturePair<Scalar>>& pairs) {
  if (pairs.empty()) return Scalar(0);
  std::size_t right = 0;
  for (const auto& p : pairs) {
    right += model.score(p.preferred) > model.score(p.rejected) ? 1 : 0;
  }
  return Scalar(right) / Scalar(pairs.size());
}

/// Plain SGD on the pairwise loss, one pair at a time in a seeded order.
/// A deterministic slice of the pairs is held out for accuracy.
template <typename Scalar>
RewardTrainingResult<Scalar> train_rm(const std::vector<FeaturePair<Scalar>>& pairs,
                                      Channel channel,
                                      const RewardTrainingOptions& options) {
  if (pairs.empty()) {
    throw NoPairsForChannel("no " + to_string(channel) + " pairs to train on");
  }
  const Eigen::Index dim = pairs.front().preferred.size();
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);

  auto n_heldout = static_cast<std::size_t>(
      std::floor(options.holdout_fraction * static_cast<double>(pairs.size())));
  if (n_heldout >= pairs.size()) n_heldout = 0;
  std::vector<FeaturePair<Scalar>> train;
  std::vector<FeaturePair<Scalar>> heldout;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_heldout ? heldout : train).push_back(pairs[order[i]]);
  }

  RewardTrainingResult<Scalar> result;
  result.model = ToyRewardModel<Scalar>::zeros(dim, channel);
  result.n_train = train.size();
  result.n_heldout = heldout.size();
  const auto lr = static_cast<Scalar>(options.learning_rate);
  std::vector<std::size_t> visit(train.size());
  std::iota(visit.begin(), visit.end(), 0);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(visit.begin(), visit.end(), rng);
    for (std::size_t i : visit) {
      result.model.weights -= lr * rm_loss_and_grad(result.model, train[i]).grad;
    }
  }
  Scalar total = 0;
  for (const auto& p : train) total += rm_loss_and_grad(result.model, p).loss;
  result.mean_loss = train.empty() ? Scalar(0) : total / Scalar(train.size());
  if (!heldout.empty()) result.heldout_accuracy = pairwise_accuracy(result.model, heldout);
  return result;
}

/// r = rm_p + alpha_r * rm_r
template <typename Scalar>
Scalar combined_reward(const Vector<Scalar>& features,
                       const ToyRewardModel<Scalar>& rm_precision,
                       const ToyRewardModel<Scalar>& rm_richness,
                       Scalar alpha_r = Scalar(0.5)) {
  return rm_precision.score(features) + alpha_r * rm_richness.score(features);
}

}  // namespace capeval::alignment

#endif  // CAPEVAL_ALIGNMENT_REWARD_MODEL_HPP_
