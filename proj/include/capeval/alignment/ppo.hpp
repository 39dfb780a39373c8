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

#ifndef CAPEVAL_ALIGNMENT_PPO_HPP_
#define CAPEVAL_ALIGNMENT_PPO_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "capeval/alignment/reward_model.hpp"
#include "capeval/alignment/toy_policy.hpp"
#include "capeval/error.hpp"

namespace capeval::alignment {

/// PPO hyper-parameters. Defaults are the production settings; toy runs
/// raise the learning rates.
template <typename Scalar>
struct PPOConfig {
  Scalar lr_actor = Scalar(1e-6);
  Scalar lr_critic = Scalar(5e-6);
  int batch_size = 256;
  Scalar kl_beta = Scalar(0.05);
  Scalar gamma = Scalar(1.0);
  Scalar lambda = Scalar(0.95);
  int ppo_epochs = 1;
  int n_minibatches = 1;
  Scalar clip_eps = Scalar(0.2);
  Scalar value_clip_eps = Scalar(0.2);
  Scalar alpha_r = Scalar(0.5);
  Scalar temperature = Scalar(1.0);
  Scalar top_p = Scalar(0.7);
  Scalar adam_beta1 = Scalar(0.9);
  Scalar adam_beta2 = Scalar(0.999);
  Scalar adam_eps = Scalar(1e-8);
  bool linear_schedule = true;

  void validate() const {
    auto open_unit = [](Scalar x) { return x > Scalar(0) && x < Scalar(1); };
    auto closed_unit = [](Scalar x) { return x >= Scalar(0) && x <= Scalar(1); };
    if (!open_unit(clip_eps) || !open_unit(value_clip_eps)) {
      throw UsageError("clip_eps and value_clip_eps must lie in (0, 1)");
    }
    if (!closed_unit(gamma) || !closed_unit(lambda)) {
      throw UsageError("gamma and lambda must lie in [0, 1]");
    }
    if (batch_size < 1 || ppo_epochs < 0 || n_minibatches < 1 ||
        n_minibatches > batch_size) {
      throw UsageError("invalid PPO batch settings");
    }
    if (top_p <= Scalar(0) || top_p > Scalar(1) || temperature < Scalar(0)) {
      throw UsageError("invalid sampling settings");
    }
  }
};

/// One sampled sequence with per-step quantities aligned by index.
template <typename Scalar>
struct Trajectory {
  int start_token = 0;
  std::vector<int> tokens;
  Vector<Scalar> logprobs;
  Vector<Scalar> ref_logprobs;
  Vector<Scalar> values;
  Vector<Scalar> rewards;
  Vector<Scalar> advantages;     // empty until gae
  Vector<Scalar> value_targets;  // empty until gae
  Scalar sequence_reward = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(tokens.size()); }
  int previous_token(Eigen::Index t) const {
    return t == 0 ? start_token : tokens[static_cast<std::size_t>(t - 1)];
  }
};

/// r_t = -beta (log pi(a_t|s_t) - log ref(a_t|s_t)); the sequence reward is
/// added at the final step.
template <typename Scalar>
Vector<Scalar> shaped_rewards(const Vector<Scalar>& logprobs,
                              const Vector<Scalar>& ref_logprobs,
                              Scalar kl_beta, Scalar sequence_reward) {
  Vector<Scalar> r = -kl_beta * (logprobs - ref_logprobs);
  if (r.size() > 0) r(r.size() - 1) += sequence_reward;
  return r;
}

template <typename Scalar>
struct GaeResult {
  Vector<Scalar> advantages;
  Vector<Scalar> value_targets;
};

/// A_t = sum_l (gamma lambda)^l delta_{t+l}, delta_t = r_t + gamma V_{t+1} - V_t,
/// with V after the last step taken as 0. Targets are A_t + V_t.
template <typename Scalar>
GaeResult<Scalar> gae(const Vector<Scalar>& rewards, const Vector<Scalar>& values,
                      Scalar gamma, Scalar lambda) {
  const Eigen::Index n = rewards.size();
  GaeResult<Scalar> out{Vector<Scalar>::Zero(n), Vector<Scalar>::Zero(n)};
  Scalar running = 0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const Scalar next_value = t + 1 < n ? values(t + 1) : Scalar(0);
    const Scalar delta = rewards(t) + gamma * next_value - values(t);
    running = delta + gamma * lambda * running;
    out.advantages(t) = running;
  }
  out.value_targets = out.advantages + values;
  return out;
}

template <typename Scalar>
struct SurrogateResult {
  Scalar objective = 0;
  Matrix<Scalar> grad;
  Scalar clip_fraction = 0;
};

/// Clipped surrogate averaged per sequence then over the batch, with its
/// gradient w.r.t. the policy parameters. The recorded logprobs are the old
/// policy's.
template <typename Scalar>
SurrogateResult<Scalar> actor_surrogate(const ToyPolicy<Scalar>& policy,
                                        std::span<const Trajectory<Scalar>> batch,
                                        Scalar clip_eps) {
  SurrogateResult<Scalar> out;
  out.grad = Matrix<Scalar>::Zero(policy.params().rows(), policy.params().cols());
  std::size_t tokens = 0;
  std::size_t clipped = 0;
  for (const auto& traj : batch) {
    const Scalar weight = Scalar(1) / (Scalar(batch.size()) * Scalar(traj.size()));
    for (Eigen::Index t = 0; t < traj.size(); ++t) {
      const int prev = traj.previous_token(t);
      const int a = traj.tokens[static_cast<std::size_t>(t)];
      const Scalar ratio =
          std::exp(policy.log_prob(static_cast<int>(t), prev, a) - traj.logprobs(t));
      const Scalar adv = traj.advantages(t);
      const Scalar unclipped = ratio * adv;
      const Scalar clipped_ratio = std::clamp(ratio, Scalar(1) - clip_eps, Scalar(1) + clip_eps);
      const Scalar clipped_term = clipped_ratio * adv;
      ++tokens;
      if (std::abs(ratio - Scalar(1)) > clip_eps) ++clipped;
      if (unclipped <= clipped_term) {
        out.objective += weight * unclipped;
        out.grad += (weight * unclipped) *
                    policy.grad_log_prob(static_cast<int>(t), prev, a);
      } else {
        out.objective += weight * clipped_term;
      }
    }
  }
  out.clip_fraction = tokens == 0 ? Scalar(0) : Scalar(clipped) / Scalar(tokens);
  return out;
}

/// Mean of max((V - target)^2, (V_clip - target)^2) with
/// V_clip = V_old + clamp(V - V_old, -eps_v, eps_v); V_old are the rollout
/// values.
template <typename Scalar>
LossAndGrad<Scalar> value_loss(const ToyCritic<Scalar>& critic,
                               const TokenSpace& space,
                               std::span<const Trajectory<Scalar>> batch,
                               Scalar value_clip_eps) {
  LossAndGrad<Scalar> out{Scalar(0), Vector<Scalar>::Zero(critic.weights.size())};
  for (const auto& traj : batch) {
    const Scalar weight = Scalar(1) / (Scalar(batch.size()) * Scalar(traj.size()));
    for (Eigen::Index t = 0; t < traj.size(); ++t) {
      const Vector<Scalar> phi =
          state_features<Scalar>(space, static_cast<int>(t), traj.previous_token(t));
      const Scalar v = critic.weights.dot(phi);
      const Scalar old = traj.values(t);
      const Scalar target = traj.value_targets(t);
      const Scalar v_clip = old + std::clamp(v - old, -value_clip_eps, value_clip_eps);
      const Scalar plain = (v - target) * (v - target);
      const Scalar clipped = (v_clip - target) * (v_clip - target);
      if (plain >= clipped) {
        out.loss += weight * plain;
        out.grad += (weight * Scalar(2) * (v - target)) * phi;
      } else {
        out.loss += weight * clipped;
      }
    }
  }
  return out;
}

/// Adam (no weight decay) over a dense parameter block.
template <typename Plain>
class Adam {
 public:
  using Scalar = typename Plain::Scalar;
  Adam(Eigen::Index rows, Eigen::Index cols, Scalar beta1, Scalar beta2, Scalar eps)
      : m_(Plain::Zero(rows, cols)), v_(Plain::Zero(rows, cols)),
        beta1_(beta1), beta2_(beta2), eps_(eps) {}

  /// Descends along `grad`.
  void step(Plain& params, const Plain& grad, Scalar lr) {
    ++t_;
    m_ = beta1_ * m_ + (Scalar(1) - beta1_) * grad;
    v_ = beta2_ * v_ + (Scalar(1) - beta2_) * grad.cwiseProduct(grad);
    const Scalar c1 = Scalar(1) - std::pow(beta1_, Scalar(t_));
    const Scalar c2 = Scalar(1) - std::pow(beta2_, Scalar(t_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

 private:
  Plain m_;
  Plain v_;
  Scalar beta1_;
  Scalar beta2_;
  Scalar eps_;
  int t_ = 0;
};

template <typename Scalar>
struct PPODiagnostics {
  Scalar mean_reward = 0;  // sequence reward before shaping
  Scalar mean_kl = 0;      // sampled log pi - log ref per token
  Scalar clip_fraction = 0;
  Scalar actor_loss = 0;   // negated surrogate
  Scalar critic_loss = 0;
};

template <typename Scalar>
struct CurveRow {
  int step = 0;
  PPODiagnostics<Scalar> diagnostics;
};

template <typename Scalar>
struct PolicyEvaluation {
  Scalar mean_reward = 0;
  Scalar mean_kl = 0;  // exact per-state KL, averaged over visited states
};

/// Mean sequence reward and exact per-state KL to `reference`, averaged over
/// the states visited by fresh samples from `policy`.
template <typename Scalar, typename Rng>
PolicyEvaluation<Scalar> evaluate_policy(const ToyPolicy<Scalar>& policy,
                                         const ToyPolicy<Scalar>& reference,
                                         const ToyRewardModel<Scalar>& rm_precision,
                                         const ToyRewardModel<Scalar>& rm_richness,
                                         const PPOConfig<Scalar>& cfg,
                                         std::span<const int> prompt_pool, int n, Rng& rng) {
  if (prompt_pool.empty()) throw UsageError("empty prompt pool");
  const TokenSpace& space = policy.space();
  std::uniform_int_distribution<std::size_t> pick(0, prompt_pool.size() - 1);
  PolicyEvaluation<Scalar> out;
  std::size_t states = 0;
  for (int i = 0; i < n; ++i) {
    int prev = prompt_pool[pick(rng)];
    std::vector<int> tokens;
    for (int t = 0; t < space.max_len; ++t) {
      out.mean_kl += state_kl(policy, reference, t, prev);
      ++states;
      const int a = sample_token(policy.logits(t, prev), cfg.temperature, cfg.top_p, rng);
      tokens.push_back(a);
      prev = a;
    }
    out.mean_reward += combined_reward(sequence_features<Scalar>(space, tokens),
                                       rm_precision, rm_richness, cfg.alpha_r);
  }
  if (n > 0) out.mean_reward /= Scalar(n);
  if (states > 0) out.mean_kl /= Scalar(states);
  return out;
}

/// Owns the policy, frozen reference, critic and optimizers for one run.
template <typename Scalar>
class PPOTrainer {
 public:
  PPOTrainer(ToyPolicy<Scalar> initial, PPOConfig<Scalar> cfg,
             ToyRewardModel<Scalar> rm_precision, ToyRewardModel<Scalar> rm_richness,
             std::uint64_t seed)
      : policy_(initial),
        reference_(std::move(initial)),
        critic_(ToyCritic<Scalar>::zeros(policy_.space())),
        cfg_(cfg),
        rm_precision_(std::move(rm_precision)),
        rm_richness_(std::move(rm_richness)),
        actor_opt_(policy_.params().rows(), policy_.params().cols(),
                   cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
        critic_opt_(critic_.weights.rows(), 1, cfg.adam_beta1, cfg.adam_beta2,
                    cfg.adam_eps),
        rng_(seed) {
    cfg_.validate();
    const auto dim = policy_.space().sequence_dim();
    if (rm_precision_.weights.size() != dim || rm_richness_.weights.size() != dim) {
      throw UsageError("reward model dimension does not match the token space");
    }
  }

  const ToyPolicy<Scalar>& policy() const { return policy_; }
  const ToyPolicy<Scalar>& reference() const { return reference_; }
  const ToyCritic<Scalar>& critic() const { return critic_; }
  const PPOConfig<Scalar>& config() const { return cfg_; }

  Scalar sequence_reward(const std::vector<int>& tokens) const {
    return combined_reward(sequence_features<Scalar>(policy_.space(), tokens),
                           rm_precision_, rm_richness_, cfg_.alpha_r);
  }

  /// Samples one sequence per start token and fills logprobs, reference
  /// logprobs, values, shaped rewards, advantages and targets.
  std::vector<Trajectory<Scalar>> rollout(std::span<const int> start_tokens) {
    const TokenSpace& space = policy_.space();
    std::vector<Trajectory<Scalar>> batch;
    batch.reserve(start_tokens.size());
    for (int start : start_tokens) {
      Trajectory<Scalar> traj;
      traj.start_token = start;
      traj.logprobs.resize(space.max_len);
      traj.ref_logprobs.resize(space.max_len);
      traj.values.resize(space.max_len);
      int prev = start;
      for (int t = 0; t < space.max_len; ++t) {
        const Vector<Scalar> logits = policy_.logits(t, prev);
        const int a = sample_token(logits, cfg_.temperature, cfg_.top_p, rng_);
        traj.tokens.push_back(a);
        traj.logprobs(t) = log_softmax(logits)(a);
        traj.ref_logprobs(t) = reference_.log_prob(t, prev, a);
        traj.values(t) = critic_.value(space, t, prev);
        prev = a;
      }
      traj.sequence_reward = sequence_reward(traj.tokens);
      traj.rewards = shaped_rewards(traj.logprobs, traj.ref_logprobs,
                                    cfg_.kl_beta, traj.sequence_reward);
      auto est = gae(traj.rewards, traj.values, cfg_.gamma, cfg_.lambda);
      traj.advantages = std::move(est.advantages);
      traj.value_targets = std::move(est.value_targets);
      batch.push_back(std::move(traj));
    }
    return batch;
  }

  /// ppo_epochs passes of actor ascent and critic descent over minibatches.
  /// Throws NonFiniteLoss before touching parameters if a loss is not finite.
  PPODiagnostics<Scalar> update(const std::vector<Trajectory<Scalar>>& batch,
                                Scalar lr_scale = Scalar(1)) {
    PPODiagnostics<Scalar> diag;
    std::size_t tokens = 0;
    for (const auto& traj : batch) {
      diag.mean_reward += traj.sequence_reward / Scalar(batch.size());
      diag.mean_kl += (traj.logprobs - traj.ref_logprobs).sum();
      tokens += traj.tokens.size();
    }
    if (tokens > 0) diag.mean_kl /= Scalar(tokens);

    const std::span<const Trajectory<Scalar>> all(batch);
    const std::size_t n_mb = static_cast<std::size_t>(cfg_.n_minibatches);
    for (int epoch = 0; epoch < cfg_.ppo_epochs; ++epoch) {
      for (std::size_t mb = 0; mb < n_mb; ++mb) {
        const std::size_t begin = mb * all.size() / n_mb;
        const std::size_t end = (mb + 1) * all.size() / n_mb;
        const auto slice = all.subspan(begin, end - begin);
        auto actor = actor_surrogate(policy_, slice, cfg_.clip_eps);
        auto critic = value_loss(critic_, policy_.space(), slice, cfg_.value_clip_eps);
        if (!std::isfinite(actor.objective) || !std::isfinite(critic.loss) ||
            !actor.grad.allFinite() || !critic.grad.allFinite()) {
          throw NonFiniteLoss("PPO update produced a non-finite loss");
        }
        Matrix<Scalar> ascent = -actor.grad;
        actor_opt_.step(policy_.params(), ascent, cfg_.lr_actor * lr_scale);
        critic_opt_.step(critic_.weights, critic.grad, cfg_.lr_critic * lr_scale);
        diag.actor_loss = -actor.objective;
        diag.critic_loss = critic.loss;
        diag.clip_fraction = actor.clip_fraction;
      }
    }
    return diag;
  }

  /// One outer iteration: sample a prompt batch, roll out, update.
  PPODiagnostics<Scalar> step(std::span<const int> prompt_pool, Scalar lr_scale) {
    std::uniform_int_distribution<std::size_t> pick(0, prompt_pool.size() - 1);
    std::vector<int> starts(static_cast<std::size_t>(cfg_.batch_size));
    for (auto& s : starts) s = prompt_pool[pick(rng_)];
    return update(rollout(starts), lr_scale);
  }

  template <typename Rng>
  PolicyEvaluation<Scalar> evaluate(std::span<const int> prompt_pool, int n, Rng& rng) const {
    return evaluate_policy(policy_, reference_, rm_precision_, rm_richness_, cfg_,
                           prompt_pool, n, rng);
  }

 private:
  ToyPolicy<Scalar> policy_;
  ToyPolicy<Scalar> reference_;
  ToyCritic<Scalar> critic_;
  PPOConfig<Scalar> cfg_;
  ToyRewardModel<Scalar> rm_precision_;
  ToyRewardModel<Scalar> rm_richness_;
  Adam<Matrix<Scalar>> actor_opt_;
  Adam<Vector<Scalar>> critic_opt_;
  std::mt19937_64 rng_;
};

template <typename Scalar>
struct PPORunResult {
  std::vector<CurveRow<Scalar>> curve;
  ToyPolicy<Scalar> policy;
  ToyPolicy<Scalar> reference;
  ToyCritic<Scalar> critic;
};

/// Runs `steps` outer iterations with an optional linear learning-rate decay.
template <typename Scalar>
PPORunResult<Scalar> run_ppo(std::span<const int> prompt_pool,
                             const PPOConfig<Scalar>& cfg,
                             const ToyRewardModel<Scalar>& rm_precision,
                             const ToyRewardModel<Scalar>& rm_richness,
                             int steps, const ToyPolicy<Scalar>& initial,
                             std::uint64_t seed) {
  if (prompt_pool.empty()) throw UsageError("empty prompt pool");
  PPOTrainer<Scalar> trainer(initial, cfg, rm_precision, rm_richness, seed);
  std::vector<CurveRow<Scalar>> curve;
  curve.reserve(static_cast<std::size_t>(std::max(steps, 0)));
  for (int s = 0; s < steps; ++s) {
    const Scalar scale = cfg.linear_schedule
                             ? Scalar(1) - Scalar(s) / Scalar(steps)
                             : Scalar(1);
    curve.push_back({s, trainer.step(prompt_pool, scale)});
  }
  return {std::move(curve), trainer.policy(), trainer.reference(), trainer.critic()};
}

}  // namespace capeval::alignment

#endif  // CAPEVAL_ALIGNMENT_PPO_HPP_
