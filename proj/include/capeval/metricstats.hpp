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

#ifndef CAPEVAL_METRICSTATS_HPP_
#define CAPEVAL_METRICSTATS_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "capeval/error.hpp"

namespace capeval::stats {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

template <typename DerivedX, typename DerivedY>
void check_paired(const Eigen::MatrixBase<DerivedX>& x,
                  const Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() != y.size()) {
    throw DegenerateInput("vectors differ in length");
  }
  if (x.size() < 2) throw DegenerateInput("need at least two observations");
}

// Merge sort on `v` returning the number of inversions.
template <typename Scalar>
std::int64_t count_inversions(std::vector<Scalar>& v, std::vector<Scalar>& buf,
                              std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

// Sum of t(t-1)/2 over runs of equal values in a sorted range.
template <typename It, typename Eq>
std::int64_t tied_pairs(It first, It last, Eq eq) {
  std::int64_t total = 0;
  while (first != last) {
    It run = first;
    std::int64_t t = 0;
    while (run != last && eq(*run, *first)) {
      ++run;
      ++t;
    }
    total += t * (t - 1) / 2;
    first = run;
  }
  return total;
}

}  // namespace detail

/// Sample Pearson correlation.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar pearson(const Eigen::MatrixBase<DerivedX>& x,
                                  const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  detail::check_paired(x, y);
  const auto xc = (x.array() - x.mean()).matrix().eval();
  const auto yc = (y.array() - y.mean()).matrix().eval();
  const Scalar sxx = xc.squaredNorm();
  const Scalar syy = yc.squaredNorm();
  if (sxx == Scalar(0) || syy == Scalar(0)) {
    throw DegenerateInput("constant vector has no correlation");
  }
  return xc.dot(yc) / std::sqrt(sxx * syy);
}

/// Residual share of the identity predictor: sum (h - m)^2 / sum (h - mean h)^2.
/// Unbounded above for mis-scaled metrics.
template <typename DerivedM, typename DerivedH>
typename DerivedM::Scalar one_minus_r2(const Eigen::MatrixBase<DerivedM>& metric,
                                       const Eigen::MatrixBase<DerivedH>& human) {
  using Scalar = typename DerivedM::Scalar;
  detail::check_paired(metric, human);
  const Scalar ss_tot = (human.array() - human.mean()).square().sum();
  if (ss_tot == Scalar(0)) throw DegenerateInput("human scores are constant");
  return (human - metric).squaredNorm() / ss_tot;
}

/// Kendall tau-b in O(n log n).
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar kendall_tau(const Eigen::MatrixBase<DerivedX>& x,
                                      const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  detail::check_paired(x, y);
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<std::pair<Scalar, Scalar>> xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xy[i] = {x(static_cast<Eigen::Index>(i)), y(static_cast<Eigen::Index>(i))};
  }
  std::sort(xy.begin(), xy.end());

  const auto n0 = static_cast<std::int64_t>(n * (n - 1) / 2);
  const std::int64_t n1 = detail::tied_pairs(
      xy.begin(), xy.end(), [](const auto& a, const auto& b) { return a.first == b.first; });
  const std::int64_t n3 = detail::tied_pairs(
      xy.begin(), xy.end(), [](const auto& a, const auto& b) { return a == b; });

  std::vector<Scalar> ys(n);
  std::transform(xy.begin(), xy.end(), ys.begin(), [](const auto& p) { return p.second; });
  std::vector<Scalar> buf(n);
  const std::int64_t swaps = detail::count_inversions(ys, buf, 0, n);
  const std::int64_t n2 =
      detail::tied_pairs(ys.begin(), ys.end(), [](Scalar a, Scalar b) { return a == b; });

  if (n0 == n1 || n0 == n2) throw DegenerateInput("all values tied");
  const auto numer = static_cast<Scalar>(n0 - n1 - n2 + n3 - 2 * swaps);
  return numer / std::sqrt(static_cast<Scalar>(n0 - n1) * static_cast<Scalar>(n0 - n2));
}

/// 1-based ranks with ties sharing their average rank.
template <typename Derived>
Vector<typename Derived::Scalar> average_ranks(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return x(a) < x(b); });
  Vector<Scalar> ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j < n && x(order[static_cast<std::size_t>(j)]) == x(order[static_cast<std::size_t>(i)])) ++j;
    const Scalar avg = Scalar(i + j + 1) / Scalar(2);
    for (Eigen::Index k = i; k < j; ++k) ranks(order[static_cast<std::size_t>(k)]) = avg;
    i = j;
  }
  return ranks;
}

template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar spearman(const Eigen::MatrixBase<DerivedX>& x,
                                   const Eigen::MatrixBase<DerivedY>& y) {
  detail::check_paired(x, y);
  return pearson(average_ranks(x), average_ranks(y));
}

template <typename Scalar>
struct SampleTau {
  Scalar mean = 0;
  std::size_t n_used = 0;
  std::size_t n_skipped = 0;
};

/// Mean per-row Kendall tau between metric and human system scores
/// (rows are samples, columns systems). Rows whose human scores are all tied
/// are skipped; a row whose metric scores are all tied contributes 0.
template <typename DerivedM, typename DerivedH>
SampleTau<typename DerivedM::Scalar> per_sample_tau_detail(
    const Eigen::MatrixBase<DerivedM>& metric, const Eigen::MatrixBase<DerivedH>& human) {
  using Scalar = typename DerivedM::Scalar;
  if (metric.rows() != human.rows() || metric.cols() != human.cols()) {
    throw DegenerateInput("metric and human matrices differ in shape");
  }
  if (metric.cols() < 2) throw DegenerateInput("need at least two systems");
  SampleTau<Scalar> out;
  Scalar total = 0;
  for (Eigen::Index r = 0; r < human.rows(); ++r) {
    const auto h = human.row(r).transpose().eval();
    const auto m = metric.row(r).transpose().eval();
    if ((h.array() == h(0)).all()) {
      ++out.n_skipped;
      continue;
    }
    if (!(m.array() == m(0)).all()) total += kendall_tau(m, h);
    ++out.n_used;
  }
  if (out.n_used == 0) throw NoValidSamples("every sample has tied human scores");
  out.mean = total / Scalar(out.n_used);
  return out;
}

template <typename DerivedM, typename DerivedH>
typename DerivedM::Scalar per_sample_tau(const Eigen::MatrixBase<DerivedM>& metric,
                                         const Eigen::MatrixBase<DerivedH>& human) {
  return per_sample_tau_detail(metric, human).mean;
}

// ---------------------------------------------------------------------------
// Ratings from pairwise votes

enum class Outcome { kA, kB, kTie };

struct Vote {
  std::string sample_id;
  std::string system_a;
  std::string system_b;
  Outcome outcome = Outcome::kTie;
};

enum class EloMode { kOnline, kBradleyTerry };

EloMode elo_mode_from_string(const std::string& s);
std::string to_string(EloMode mode);
Outcome outcome_from_string(const std::string& s);

struct EloOptions {
  double initial = 1000.0;
  double k_factor = 32.0;
  double scale = 400.0;
  /// Bradley-Terry only: pseudo-wins and pseudo-losses against a fixed
  /// unit-strength opponent, keeping undefeated systems finite. 0 disables.
  double prior_games = 0.5;
  double tolerance = 1e-8;
  int max_iterations = 100000;
};

using Ratings = std::map<std::string, double>;

/// Online Elo applies votes in order; Bradley-Terry is order-independent.
Ratings elo_ratings(const std::vector<Vote>& votes, EloMode mode,
                    const EloOptions& options = {});

nlohmann::ordered_json ratings_to_json(const Ratings& ratings, EloMode mode);

}  // namespace capeval::stats

#endif  // CAPEVAL_METRICSTATS_HPP_
