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

#ifndef CAPEVAL_TESTS_TOY_SETUP_HPP_
#define CAPEVAL_TESTS_TOY_SETUP_HPP_

#include <numeric>
#include <vector>

#include "capeval/alignment/ppo.hpp"

namespace toy {

using capeval::alignment::PPOConfig;
using capeval::alignment::TokenSpace;
using capeval::alignment::ToyRewardModel;

inline TokenSpace space() { return TokenSpace{8, 8}; }

// Reward = weight * (fraction of positions holding `token`).
inline ToyRewardModel<double> token_reward(const TokenSpace& s, int token, double weight = 1.0) {
  auto rm = ToyRewardModel<double>::zeros(s.sequence_dim(), capeval::Channel::kPrecision);
  rm.weights(token) = weight * s.max_len;
  return rm;
}

inline ToyRewardModel<double> no_reward(const TokenSpace& s) {
  return ToyRewardModel<double>::zeros(s.sequence_dim(), capeval::Channel::kRichness);
}

// Default hyperparameters with learning rates raised for the toy problem.
inline PPOConfig<double> config() {
  PPOConfig<double> cfg;
  cfg.lr_actor = 1e-2;
  cfg.lr_critic = 5e-2;
  return cfg;
}

inline std::vector<int> prompt_pool(const TokenSpace& s) {
  std::vector<int> pool(static_cast<std::size_t>(s.vocab_size));
  std::iota(pool.begin(), pool.end(), 0);
  return pool;
}

}  // namespace toy

#endif  // CAPEVAL_TESTS_TOY_SETUP_HPP_
