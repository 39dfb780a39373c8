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

#include "capeval/dcscore.hpp"

#include <set>
#include <vector>

#include "capeval/error.hpp"

namespace capeval {

namespace {

struct Counts {
  std::size_t pred = 0;
  std::size_t pred_true = 0;
  std::size_t matched = 0;
  std::size_t oracle = 0;
  std::size_t unmatched_true = 0;
};

Counts count(const UnitSet& pred, const OracleSet& oracle) {
  Counts c;
  c.pred = pred.size();
  c.oracle = oracle.size();
  std::set<std::string> matched_ids;
  for (const auto& u : pred.units) {
    const bool in_q = u.matched_oracle_id && oracle.contains(*u.matched_oracle_id);
    if (in_q) matched_ids.insert(*u.matched_oracle_id);
    if (u.verified.value_or(false)) {
      ++c.pred_true;
      if (!in_q) ++c.unmatched_true;
    }
  }
  c.matched = matched_ids.size();
  return c;
}

double ratio_or(std::size_t num, std::size_t den, double fallback) {
  return den == 0 ? fallback
                  : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double precision(const UnitSet& pred) {
  std::size_t correct = 0;
  for (const auto& u : pred.units) correct += u.verified.value_or(false) ? 1 : 0;
  return ratio_or(correct, pred.size(), 0.0);
}

double recall(const UnitSet& pred, const OracleSet& oracle) {
  const Counts c = count(pred, oracle);
  return ratio_or(c.matched + c.unmatched_true, c.oracle + c.unmatched_true, 1.0);
}

double f1(double p, double r) {
  const double s = p + r;
  return s == 0.0 ? 0.0 : 2.0 * p * r / s;
}

ChannelScore score_channel(const UnitSet& pred, const OracleSet& oracle) {
  const Counts c = count(pred, oracle);
  ChannelScore s;
  s.n_pred = c.pred;
  s.n_pred_true = c.pred_true;
  s.n_matched = c.matched;
  s.n_oracle = c.oracle;
  s.n_unmatched_true = c.unmatched_true;
  s.degenerate = c.pred == 0;
  s.precision = ratio_or(c.pred_true, c.pred, 0.0);
  s.recall = ratio_or(c.matched + c.unmatched_true, c.oracle + c.unmatched_true, 1.0);
  s.f1 = f1(s.precision, s.recall);
  return s;
}

ScoreReport score_caption(const UnitSet& pred, const OracleSet& oracle) {
  ScoreReport report;
  report.all = score_channel(pred, oracle);
  report.descriptive =
      score_channel(partition_descriptive(pred).first, oracle.descriptive_only());
  report.final_f = (report.all.f1 + report.descriptive.f1) / 2.0;
  return report;
}

ScoreSummary aggregate(std::span<const ScoreReport> reports) {
  if (reports.empty()) throw EmptyInput("no score reports to aggregate");
  ScoreSummary s;
  s.n_samples = reports.size();
  for (const auto& r : reports) {
    s.n_degenerate += r.degenerate() ? 1 : 0;
    s.s_p += r.all.precision;
    s.s_r += r.all.recall;
    s.s_f += r.all.f1;
    s.s_p_desc += r.descriptive.precision;
    s.s_r_desc += r.descriptive.recall;
    s.s_f_desc += r.descriptive.f1;
    s.final_f += r.final_f;
  }
  const double n = static_cast<double>(reports.size());
  for (double* v : {&s.s_p, &s.s_r, &s.s_f, &s.s_p_desc, &s.s_r_desc,
                    &s.s_f_desc, &s.final_f}) {
    *v /= n;
  }
  return s;
}

nlohmann::ordered_json to_json(const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  j["system_tag"] = r.system_tag;
  j["s_p"] = r.all.precision;
  j["s_r"] = r.all.recall;
  j["s_f"] = r.all.f1;
  j["s_p_desc"] = r.descriptive.precision;
  j["s_r_desc"] = r.descriptive.recall;
  j["s_f_desc"] = r.descriptive.f1;
  j["final_f"] = r.final_f;
  j["degenerate"] = r.degenerate();
  auto counts = [](const ChannelScore& c) {
    nlohmann::ordered_json k;
    k["n_pred"] = c.n_pred;
    k["n_pred_true"] = c.n_pred_true;
    k["n_matched"] = c.n_matched;
    k["n_oracle"] = c.n_oracle;
    k["n_unmatched_true"] = c.n_unmatched_true;
    return k;
  };
  j["counts"] = counts(r.all);
  j["counts_desc"] = counts(r.descriptive);
  return j;
}

nlohmann::ordered_json to_json(const ScoreSummary& s) {
  nlohmann::ordered_json j;
  j["n_samples"] = s.n_samples;
  j["n_degenerate"] = s.n_degenerate;
  j["s_p"] = s.s_p;
  j["s_r"] = s.s_r;
  j["s_f"] = s.s_f;
  j["s_p_desc"] = s.s_p_desc;
  j["s_r_desc"] = s.s_r_desc;
  j["s_f_desc"] = s.s_f_desc;
  j["final_f"] = s.final_f;
  return j;
}

nlohmann::ordered_json summarize_by_system(std::span<const ScoreReport> reports) {
  std::map<std::string, std::vector<ScoreReport>> by_system;
  for (const auto& r : reports) by_system[r.system_tag].push_back(r);
  nlohmann::ordered_json systems = nlohmann::ordered_json::object();
  for (const auto& [tag, rs] : by_system) systems[tag] = to_json(aggregate(rs));
  nlohmann::ordered_json j;
  j["overall"] = to_json(aggregate(reports));
  j["systems"] = systems;
  return j;
}

}  // namespace capeval
