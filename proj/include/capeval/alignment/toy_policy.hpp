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

#ifndef CAPEVAL_ALIGNMENT_TOY_POLICY_HPP_
#define CAPEVAL_ALIGNMENT_TOY_POLICY_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "capeval/error.hpp"

namespace capeval::alignment {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr int kMaxVocab = 32;
inline constexpr int kMaxLength = 16;

/// Shape of the toy generation problem: fixed-length sequences over a small
/// vocabulary. A prompt is reduced to the token that seeds the first state.
struct TokenSpace {
  int vocab_size = 8;
  int max_len = 8;

  /// one-hot position, one-hot previous token, bias
  int state_dim() const { return max_len + vocab_size + 1; }
  /// normalized token counts, normalized length
  int sequence_dim() const { return vocab_size + 1; }

  void validate() const {
    if (vocab_size < 2 || vocab_size > kMaxVocab || max_len < 1 ||
        max_len > kMaxLength) {
      throw UsageError("toy token space must have 2 <= vocab <= 32 and "
                       "1 <= max_len <= 16");
    }
  }
};

template <typename Scalar>
Vector<Scalar> state_features(const TokenSpace& space, int position,
                              int previous_token) {
  Vector<Scalar> phi = Vector<Scalar>::Zero(space.state_dim());
  phi(position) = Scalar(1);
  phi(space.max_len + previous_token) = Scalar(1);
  phi(space.state_dim() - 1) = Scalar(1);
  return phi;
}

/// Features a reward model sees for a token sequence of any length.
template <typename Scalar>
Vector<Scalar> sequence_features(const TokenSpace& space,
                                 const std::vector<int>& tokens) {
  Vector<Scalar> f = Vector<Scalar>::Zero(space.sequence_dim());
  const Scalar scale = Scalar(1) / Scalar(space.max_len);
  for (int t : tokens) f(t) += scale;
  f(space.vocab_size) = Scalar(tokens.size()) * scale;
  return f;
}

template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar max = logits.maxCoeff();
  Vector<Scalar> e = (logits.array() - max).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
Vector<typename Derived::Scalar> log_softmax(
    const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar max = logits.maxCoeff();
  const Scalar lse = max + std::log((logits.array() - max).exp().sum());
  return (logits.array() - lse).matrix();
}

/// Linear softmax policy: logits(s) = params^T phi(s).
template <typename Scalar>
class ToyPolicy {
 public:
  ToyPolicy(TokenSpace space, Matrix<Scalar> params)
      : space_(space), params_(std::move(params)) {
    space_.validate();
    if (params_.rows() != space_.state_dim() ||
        params_.cols() != space_.vocab_size) {
      throw UsageError("toy policy params have the wrong shape");
    }
  }

  static ToyPolicy zeros(TokenSpace space) {
    return ToyPolicy(space, Matrix<Scalar>::Zero(space.state_dim(), space.vocab_size));
  }

  template <typename Rng>
  static ToyPolicy random(TokenSpace space, Scalar stddev, Rng& rng) {
    std::normal_distribution<double> normal(0.0, static_cast<double>(stddev));
    Matrix<Scalar> params(space.state_dim(), space.vocab_size);
    for (Eigen::Index j = 0; j < params.cols(); ++j) {
      for (Eigen::Index i = 0; i < params.rows(); ++i) {
        params(i, j) = static_cast<Scalar>(normal(rng));
      }
    }
    return ToyPolicy(space, std::move(params));
  }

  const TokenSpace& space() const { return space_; }
  const Matrix<Scalar>& params() const { return params_; }
  Matrix<Scalar>& params() { return params_; }

  Vector<Scalar> logits(int position, int previous) const {
    return params_.transpose() *
           state_features<Scalar>(space_, position, previous);
  }
  Vector<Scalar> probs(int position, int previous) const {
    return softmax(logits(position, previous));
  }
  Vector<Scalar> log_probs(int position, int previous) const {
    return log_softmax(logits(position, previous));
  }
  Scalar log_prob(int position, int previous, int token) const {
    return log_probs(position, previous)(token);
  }

  /// d log pi(token | s) / d params = phi(s) (e_token - pi(.|s))^T
  Matrix<Scalar> grad_log_prob(int position, int previous, int token) const {
    Vector<Scalar> delta = -probs(position, previous);
    delta(token) += Scalar(1);
    return state_features<Scalar>(space_, position, previous) *
           delta.transpose();
  }

 private:
  TokenSpace space_;
  Matrix<Scalar> params_;
};

/// Linear value model over the policy's state features.
template <typename Scalar>
struct ToyCritic {
  Vector<Scalar> weights;

  static ToyCritic zeros(const TokenSpace& space) {
    return {Vector<Scalar>::Zero(space.state_dim())};
  }
  Scalar value(const TokenSpace& space, int position, int previous) const {
    return weights.dot(state_features<Scalar>(space, position, previous));
  }
};

/// KL(pi(.|s) || ref(.|s)) at one state.
template <typename Scalar>
Scalar state_kl(const ToyPolicy<Scalar>& policy, const ToyPolicy<Scalar>& ref,
                int position, int previous) {
  const Vector<Scalar> lp = policy.log_probs(position, previous);
  const Vector<Scalar> lq = ref.log_probs(position, previous);
  return (lp.array().exp() * (lp - lq).array()).sum();
}

/// Draws a token with temperature scaling and nucleus (top-p) truncation.
/// Equal probabilities are ordered randomly before truncation.
template <typename Scalar, typename Rng>
int sample_token(const Vector<Scalar>& logits, Scalar temperature, Scalar top_p,
                 Rng& rng) {
  const Eigen::Index n = logits.size();
  if (temperature <= Scalar(0)) {
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    return static_cast<int>(best);
  }
  const Vector<Scalar> p = softmax((logits / temperature).eval());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return p(a) > p(b); });
  Scalar mass = 0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    mass += p(order[keep]);
    ++keep;
    if (mass >= top_p) break;
  }
  std::uniform_real_distribution<double> uniform(0.0, static_cast<double>(mass));
  const double u = uniform(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < keep; ++i) {
    acc += static_cast<double>(p(order[i]));
    if (u < acc) return order[i];
  }
  return order[keep - 1];
}

/// FNV-1a, for mapping text onto the toy vocabulary stably across platforms.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Lower-cased whitespace-separated words hashed into the vocabulary.
inline std::vector<int> text_tokens(std::string_view text, int vocab_size) {
  std::vector<int> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      tokens.push_back(static_cast<int>(fnv1a(word) % static_cast<std::uint64_t>(vocab_size)));
      word.clear();
    }
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return tokens;
}

inline int prompt_start_token(std::string_view prompt, int vocab_size) {
  return static_cast<int>(fnv1a(prompt) % static_cast<std::uint64_t>(vocab_size));
}

}  // namespace capeval::alignment

#endif  // CAPEVAL_ALIGNMENT_TOY_POLICY_HPP_
