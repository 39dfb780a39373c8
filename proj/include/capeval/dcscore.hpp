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

#ifndef CAPEVAL_DCSCORE_HPP_
#define CAPEVAL_DCSCORE_HPP_

#include <cstddef>
#include <map>
#include <span>
#include <string>

#include "capeval/units.hpp"
#include "json.hpp"

namespace capeval {

/// Precision/recall/F1 of one unit channel (all units, or descriptive only).
struct ChannelScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_pred = 0;            // |P|
  std::size_t n_pred_true = 0;       // |P_true|
  std::size_t n_matched = 0;         // |Q|, distinct oracle ids
  std::size_t n_oracle = 0;          // |O|
  std::size_t n_unmatched_true = 0;  // |P_true \ Q|
  bool degenerate = false;           // |P| = 0

  bool operator==(const ChannelScore&) const = default;
};

struct ScoreReport {
  std::string sample_id;
  std::string system_tag;
  ChannelScore all;
  ChannelScore descriptive;
  double final_f = 0.0;  // (all.f1 + descriptive.f1) / 2

  bool degenerate() const { return all.degenerate; }
};

/// |P_true| / |P|; 0 for an empty set.
double precision(const UnitSet& pred);

/// (|Q| + |X|) / (|O| + |X|) where Q is the set of distinct oracle ids the
/// units match inside `oracle` and X the verified units not in Q.
/// Returns 1 when |O| = |X| = 0.
double recall(const UnitSet& pred, const OracleSet& oracle);

/// Harmonic mean; 0 when p + r = 0.
double f1(double p, double r);

ChannelScore score_channel(const UnitSet& pred, const OracleSet& oracle);

/// Scores all units and the descriptive-only subsets of both sets.
ScoreReport score_caption(const UnitSet& pred, const OracleSet& oracle);

struct ScoreSummary {
  std::size_t n_samples = 0;
  std::size_t n_degenerate = 0;
  double s_p = 0, s_r = 0, s_f = 0;
  double s_p_desc = 0, s_r_desc = 0, s_f_desc = 0;
  double final_f = 0;
};

/// Per-sample means. Throws EmptyInput for no reports.
ScoreSummary aggregate(std::span<const ScoreReport> reports);

nlohmann::ordered_json to_json(const ScoreReport& report);
nlohmann::ordered_json to_json(const ScoreSummary& summary);

/// {"overall": summary, "systems": {tag: summary}} with systems sorted by tag.
nlohmann::ordered_json summarize_by_system(std::span<const ScoreReport> reports);

}  // namespace capeval

#endif  // CAPEVAL_DCSCORE_HPP_
