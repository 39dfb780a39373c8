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

#include "capeval/commands.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "capeval/alignment/ppo.hpp"
#include "capeval/alignment/reward_model.hpp"
#include "capeval/dataset_io.hpp"
#include "capeval/dcscore.hpp"
#include "capeval/decomposer.hpp"
#include "capeval/error.hpp"
#include "capeval/feedquill.hpp"
#include "capeval/matcher.hpp"
#include "capeval/parallel.hpp"
#include "capeval/templates.hpp"
#include "capeval/verifier.hpp"

namespace capeval {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

int exit_code_for(std::exception_ptr error) {
  try {
    std::rethrow_exception(error);
  } catch (const BackendError&) {
    return exit_codes::kBackend;
  } catch (const JsonParseError&) {
    return exit_codes::kBackend;
  } catch (...) {
    return exit_codes::kUsage;
  }
}

RunConfig resolve_config(RunConfig cfg, const CommandOptions& opts) {
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.backend) apply_backend_override(cfg, *opts.backend);
  cfg.validate();
  return cfg;
}

namespace {

std::unique_ptr<Gateway> make_gateway(const RunConfig& cfg, const CommandOptions& opts) {
  GatewayOptions g;
  g.cache_dir = cfg.cache_dir;
  g.offline = opts.offline;
  g.transport_override = opts.transport_override;
  if (!cfg.cache_dir.empty()) fs::create_directories(cfg.cache_dir);
  return std::make_unique<Gateway>(cfg.backends, std::move(g));
}

TemplateStore make_templates(const RunConfig& cfg) {
  return cfg.templates_dir ? TemplateStore::with_overrides(*cfg.templates_dir)
                           : TemplateStore::builtin();
}

void require_role(const std::string& role, const std::string& backend) {
  if (backend.empty()) throw ConfigError(role + " backend is not configured");
}

std::string jsonl(const std::vector<ordered_json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

ordered_json skipped_json(const std::vector<std::pair<std::string, std::string>>& skipped) {
  ordered_json out = ordered_json::array();
  for (const auto& [id, why] : skipped) out.push_back({{"sample_id", id}, {"error", why}});
  return out;
}

struct SampleFailure {
  std::exception_ptr error;
  std::string message;
};

}  // namespace

// ---------------------------------------------------------------------------
// score

int cmd_score(const fs::path& samples_path, const fs::path& oracles_path,
              const RunConfig& raw_cfg, const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(raw_cfg, opts);
  require_role("score.decomposer", cfg.score.decomposer);
  require_role("score.matcher", cfg.score.matcher);
  require_role("score.verifier", cfg.score.verifier);

  const auto samples = io::read_samples(samples_path);
  if (samples.empty()) throw UsageError("no samples in " + samples_path.string());
  const auto oracles = io::read_oracles(oracles_path);
  std::vector<std::string> missing;
  for (const auto& s : samples) {
    const auto it = oracles.find(s.sample_id);
    if (it == oracles.end()) {
      missing.push_back(s.sample_id);
    } else if (!it->second.units && !cfg.score.oracle_decomposer) {
      throw MissingOracle("oracle for '" + s.sample_id +
                          "' has no units and score.oracle_decomposer is unset");
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw MissingOracle("no oracle for samples: " + list);
  }

  auto gateway = make_gateway(cfg, opts);
  const TemplateStore templates = make_templates(cfg);
  const DecompositionConfig dcfg{cfg.score.decomposer, cfg.score.max_units,
                                 template_ids::kDecompose};
  const MatchConfig mcfg{cfg.score.matcher, template_ids::kMatch};
  const VerifyConfig vcfg{cfg.score.verifier, template_ids::kVerify};
  const fs::path image_base = samples_path.parent_path();

  std::vector<std::optional<ScoreReport>> reports(samples.size());
  std::vector<std::optional<SampleFailure>> failures(samples.size());
  parallel_for(samples.size(), cfg.score.max_parallel_samples, [&](std::size_t i) {
    const CaptionSample& sample = samples[i];
    try {
      const io::OracleRecord& rec = oracles.at(sample.sample_id);
      OracleSet oracle;
      if (rec.units) {
        oracle = *rec.units;
      } else {
        DecompositionConfig ocfg = dcfg;
        ocfg.backend = *cfg.score.oracle_decomposer;
        oracle = io::oracle_from_units(decompose(rec.caption, ocfg, *gateway, templates));
      }
      UnitSet pred;
      try {
        pred = decompose(sample.caption, dcfg, *gateway, templates);
      } catch (const EmptyCaption&) {
        spdlog::warn("sample {}: empty caption scored as degenerate", sample.sample_id);
      } catch (const EmptyDecomposition&) {
        spdlog::warn("sample {}: no units extracted, scored as degenerate",
                     sample.sample_id);
      }
      pred.source_caption = sample.caption;
      if (!pred.empty()) {
        pred = match(pred, oracle, mcfg, *gateway, templates);
        pred = verify_dcscore(pred, rec.caption, io::load_image(sample, image_base),
                              vcfg, *gateway, templates);
      }
      ScoreReport report = score_caption(pred, oracle);
      report.sample_id = sample.sample_id;
      report.system_tag = sample.system_tag;
      reports[i] = std::move(report);
    } catch (const std::exception& e) {
      failures[i] = SampleFailure{std::current_exception(), e.what()};
    }
  });

  std::vector<ScoreReport> done;
  std::vector<std::pair<std::string, std::string>> skipped;
  std::exception_ptr first_error;
  std::vector<ordered_json> lines;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (failures[i]) {
      spdlog::warn("sample {} skipped: {}", samples[i].sample_id, failures[i]->message);
      skipped.emplace_back(samples[i].sample_id, failures[i]->message);
      if (!first_error) first_error = failures[i]->error;
      continue;
    }
    lines.push_back(to_json(*reports[i]));
    done.push_back(std::move(*reports[i]));
  }
  if (done.empty()) std::rethrow_exception(first_error);

  ordered_json summary;
  summary["seed"] = cfg.seed;
  summary["n_samples"] = samples.size();
  summary["n_scored"] = done.size();
  summary["skipped"] = skipped_json(skipped);
  const ordered_json by_system = summarize_by_system(done);
  summary["overall"] = by_system["overall"];
  summary["systems"] = by_system["systems"];

  io::write_text_atomic(opts.out_dir / "reports.jsonl", jsonl(lines));
  io::write_text_atomic(opts.out_dir / "summary.json", summary.dump(2) + "\n");
  spdlog::info("scored {}/{} samples ({} transport calls, {} cache hits)", done.size(),
               samples.size(), gateway->transport_calls(), gateway->cache_hits());
  return skipped.empty() ? exit_codes::kOk : exit_codes::kPartial;
}

// ---------------------------------------------------------------------------
// prefgen

const std::string& pick_prompt(const std::vector<std::string>& pool,
                               const std::string& sample_id, std::int64_t seed) {
  if (pool.empty()) throw ConfigError("empty prompt pool");
  const std::uint64_t h =
      alignment::fnv1a(sample_id) ^ (static_cast<std::uint64_t>(seed) * 0x9E3779B97F4A7C15ULL);
  return pool[h % pool.size()];
}

int cmd_prefgen(const fs::path& samples_path, const RunConfig& raw_cfg,
                const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(raw_cfg, opts);
  if (cfg.prefgen.n_candidates < 2) {
    throw UsageError("prefgen.n_candidates must be at least 2");
  }
  require_role("prefgen.generator", cfg.prefgen.generator);
  require_role("prefgen.decomposer", cfg.prefgen.decomposer);
  if (cfg.prefgen.ensemble.empty()) throw ConfigError("prefgen.ensemble is empty");

  auto samples = io::read_samples(samples_path);
  if (samples.empty()) throw UsageError("no samples in " + samples_path.string());
  const auto& pool = cfg.prefgen.prompt_pool.empty() ? default_caption_prompts()
                                                     : cfg.prefgen.prompt_pool;
  for (auto& s : samples) {
    if (s.prompt.empty()) s.prompt = pick_prompt(pool, s.sample_id, cfg.seed);
  }

  FeedQuillConfig fq;
  fq.generator = cfg.prefgen.generator;
  fq.decomposer = DecompositionConfig{cfg.prefgen.decomposer, std::nullopt,
                                      template_ids::kDecompose};
  fq.ensemble = cfg.prefgen.ensemble;
  fq.n_candidates = cfg.prefgen.n_candidates;
  fq.seed = cfg.seed;
  fq.pairs.min_margin = cfg.prefgen.min_margin;
  fq.pairs.precision_floor = cfg.prefgen.precision_floor;
  fq.max_parallel_samples = cfg.prefgen.max_parallel_samples;

  auto gateway = make_gateway(cfg, opts);
  const TemplateStore templates = make_templates(cfg);
  const fs::path image_base = samples_path.parent_path();
  const DatasetResult result = generate_dataset(
      samples, fq, *gateway, templates,
      [&](const CaptionSample& s) { return io::load_image(s, image_base); });

  write_pairs_jsonl(opts.out_dir / "d_precision.jsonl", result.precision_pairs);
  write_pairs_jsonl(opts.out_dir / "d_richness.jsonl", result.richness_pairs);
  ordered_json summary;
  summary["seed"] = cfg.seed;
  summary["n_samples"] = samples.size();
  summary["n_candidates"] = cfg.prefgen.n_candidates;
  summary["precision_pairs"] = result.precision_pairs.size();
  summary["richness_pairs"] = result.richness_pairs.size();
  summary["skipped"] = skipped_json(result.failed_samples);
  io::write_text_atomic(opts.out_dir / "prefgen_summary.json", summary.dump(2) + "\n");
  spdlog::info("{} precision and {} richness pairs from {} samples",
               result.precision_pairs.size(), result.richness_pairs.size(),
               samples.size());
  return result.failed_samples.empty() ? exit_codes::kOk : exit_codes::kPartial;
}

// ---------------------------------------------------------------------------
// align

namespace {

std::vector<alignment::FeaturePair<double>> featurize(
    const std::vector<PreferencePair>& pairs, Channel channel,
    const alignment::TokenSpace& space) {
  std::vector<alignment::FeaturePair<double>> out;
  for (const auto& p : pairs) {
    if (p.channel != channel) continue;
    out.push_back({alignment::sequence_features<double>(
                       space, alignment::text_tokens(p.preferred, space.vocab_size)),
                   alignment::sequence_features<double>(
                       space, alignment::text_tokens(p.rejected, space.vocab_size))});
  }
  return out;
}

std::vector<PreferencePair> read_channel(const fs::path& path, Channel channel) {
  if (!fs::exists(path)) {
    throw UsageError(to_string(channel) + " dataset not found: " + path.string());
  }
  return read_pairs_jsonl(path);
}

ordered_json rm_json(const alignment::RewardTrainingResult<double>& r,
                     const alignment::TokenSpace& space) {
  ordered_json j;
  j["channel"] = to_string(r.model.channel);
  j["vocab_size"] = space.vocab_size;
  j["max_len"] = space.max_len;
  j["weights"] = std::vector<double>(r.model.weights.data(),
                                     r.model.weights.data() + r.model.weights.size());
  j["mean_loss"] = r.mean_loss;
  j["heldout_accuracy"] = r.heldout_accuracy ? ordered_json(*r.heldout_accuracy)
                                             : ordered_json(nullptr);
  j["n_train"] = r.n_train;
  j["n_heldout"] = r.n_heldout;
  return j;
}

}  // namespace

int cmd_align(const fs::path& d_precision, const fs::path& d_richness,
              const RunConfig& raw_cfg, const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(raw_cfg, opts);
  const auto& space = cfg.align.space;
  const auto prec_pairs = read_channel(d_precision, Channel::kPrecision);
  const auto rich_pairs = read_channel(d_richness, Channel::kRichness);

  alignment::RewardTrainingOptions rm_opts = cfg.align.rm;
  rm_opts.seed = static_cast<std::uint64_t>(cfg.seed);
  const auto rm_p = alignment::train_rm(featurize(prec_pairs, Channel::kPrecision, space),
                                        Channel::kPrecision, rm_opts);
  const auto rm_r = alignment::train_rm(featurize(rich_pairs, Channel::kRichness, space),
                                        Channel::kRichness, rm_opts);

  std::set<int> starts;
  for (const auto* pairs : {&prec_pairs, &rich_pairs}) {
    for (const auto& p : *pairs) {
      starts.insert(alignment::prompt_start_token(p.context.prompt, space.vocab_size));
    }
  }
  const std::vector<int> pool(starts.begin(), starts.end());

  std::mt19937_64 init_rng(static_cast<std::uint64_t>(cfg.seed));
  const auto initial = cfg.align.init_stddev > 0.0
                           ? alignment::ToyPolicy<double>::random(space, cfg.align.init_stddev, init_rng)
                           : alignment::ToyPolicy<double>::zeros(space);
  const auto run = alignment::run_ppo<double>(pool, cfg.align.ppo, rm_p.model, rm_r.model,
                                              cfg.align.steps, initial,
                                              static_cast<std::uint64_t>(cfg.seed) + 1);

  std::string csv = "step,mean_reward,mean_kl,clip_frac,actor_loss,critic_loss\n";
  for (const auto& row : run.curve) {
    const auto& d = row.diagnostics;
    csv += std::to_string(row.step) + "," + format_number(d.mean_reward) + "," +
           format_number(d.mean_kl) + "," + format_number(d.clip_fraction) + "," +
           format_number(d.actor_loss) + "," + format_number(d.critic_loss) + "\n";
  }

  std::mt19937_64 eval_rng_a(static_cast<std::uint64_t>(cfg.seed) + 2);
  std::mt19937_64 eval_rng_b(static_cast<std::uint64_t>(cfg.seed) + 2);
  const auto eval_before = alignment::evaluate_policy(
      initial, initial, rm_p.model, rm_r.model, cfg.align.ppo, std::span<const int>(pool),
      cfg.align.eval_samples, eval_rng_a);
  const auto eval_after = alignment::evaluate_policy(
      run.policy, run.reference, rm_p.model, rm_r.model, cfg.align.ppo,
      std::span<const int>(pool), cfg.align.eval_samples, eval_rng_b);

  ordered_json summary;
  summary["seed"] = cfg.seed;
  summary["steps"] = cfg.align.steps;
  summary["prompt_start_tokens"] = pool;
  summary["initial"] = {{"mean_reward", eval_before.mean_reward},
                        {"mean_kl", eval_before.mean_kl}};
  summary["final"] = {{"mean_reward", eval_after.mean_reward},
                      {"mean_kl", eval_after.mean_kl}};

  ordered_json snapshot = to_json(cfg);
  io::write_text_atomic(opts.out_dir / "rm_precision.json", rm_json(rm_p, space).dump(2) + "\n");
  io::write_text_atomic(opts.out_dir / "rm_richness.json", rm_json(rm_r, space).dump(2) + "\n");
  io::write_text_atomic(opts.out_dir / "ppo_curve.csv", csv);
  io::write_text_atomic(opts.out_dir / "align_summary.json", summary.dump(2) + "\n");
  io::write_text_atomic(opts.out_dir / "config_snapshot.json", snapshot.dump(2) + "\n");
  return exit_codes::kOk;
}

// ---------------------------------------------------------------------------
// stats

namespace {

using ScoreKey = std::pair<std::string, std::string>;  // sample_id, system_tag

std::map<ScoreKey, double> read_scores(const fs::path& path) {
  const io::CsvTable table = io::read_csv(path);
  const std::size_t id_col = table.column("sample_id");
  const std::size_t score_col = table.column("score");
  const auto sys_it = std::find(table.header.begin(), table.header.end(), "system_tag");
  const bool has_system = sys_it != table.header.end();
  const auto sys_col = static_cast<std::size_t>(sys_it - table.header.begin());
  std::map<ScoreKey, double> out;
  for (const auto& row : table.rows) {
    ScoreKey key{row[id_col], has_system ? row[sys_col] : std::string()};
    double value = 0.0;
    try {
      std::size_t used = 0;
      value = std::stod(row[score_col], &used);
      if (used != row[score_col].size()) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw UsageError(path.string() + ": bad score '" + row[score_col] + "'");
    }
    if (!out.emplace(key, value).second) {
      throw UsageError(path.string() + ": duplicate row for " + key.first +
                       (key.second.empty() ? "" : "/" + key.second));
    }
  }
  if (out.empty()) throw EmptyInput(path.string() + " has no rows");
  return out;
}

std::string key_name(const ScoreKey& k) {
  return k.second.empty() ? k.first : k.first + "/" + k.second;
}

ordered_json correlation_stats(const std::map<ScoreKey, double>& metric,
                               const std::map<ScoreKey, double>& human) {
  std::vector<std::string> offenders;
  for (const auto& [k, v] : metric) {
    if (!human.count(k)) offenders.push_back(key_name(k) + " (metric only)");
  }
  for (const auto& [k, v] : human) {
    if (!metric.count(k)) offenders.push_back(key_name(k) + " (human only)");
  }
  if (!offenders.empty()) {
    std::string list;
    for (const auto& o : offenders) list += (list.empty() ? "" : ", ") + o;
    throw IdMismatch("metric and human ids differ: " + list);
  }

  const auto n = static_cast<Eigen::Index>(metric.size());
  Eigen::VectorXd m(n), h(n);
  Eigen::Index i = 0;
  for (const auto& [k, v] : metric) {
    m(i) = v;
    h(i) = human.at(k);
    ++i;
  }
  ordered_json j;
  j["n"] = n;
  j["pearson"] = stats::pearson(m, h);
  j["one_minus_r2"] = stats::one_minus_r2(m, h);
  j["kendall_tau_b"] = stats::kendall_tau(m, h);
  j["spearman"] = stats::spearman(m, h);

  // Sample-wise tau needs a complete sample x system grid.
  std::set<std::string> sample_ids, systems;
  for (const auto& [k, v] : metric) {
    sample_ids.insert(k.first);
    systems.insert(k.second);
  }
  ordered_json sample_tau = nullptr;
  std::string note;
  if (systems.size() < 2) {
    note = "needs a system_tag column with at least two systems";
  } else if (sample_ids.size() * systems.size() != metric.size()) {
    note = "every sample must be scored for every system";
  } else {
    Eigen::MatrixXd mm(static_cast<Eigen::Index>(sample_ids.size()),
                       static_cast<Eigen::Index>(systems.size()));
    Eigen::MatrixXd hh(mm.rows(), mm.cols());
    Eigen::Index r = 0;
    for (const auto& sid : sample_ids) {
      Eigen::Index c = 0;
      for (const auto& sys : systems) {
        mm(r, c) = metric.at({sid, sys});
        hh(r, c) = human.at({sid, sys});
        ++c;
      }
      ++r;
    }
    try {
      const auto t = stats::per_sample_tau_detail(mm, hh);
      sample_tau = {{"definition", "mean per-sample Kendall tau-b of system rankings"},
                    {"mean", t.mean},
                    {"n_used", t.n_used},
                    {"n_skipped_tied", t.n_skipped}};
    } catch (const NoValidSamples& e) {
      note = e.what();
    }
  }
  j["sample_tau"] = sample_tau;
  if (!note.empty()) j["sample_tau_note"] = note;
  return j;
}

std::vector<stats::Vote> read_votes(const fs::path& path) {
  const io::CsvTable table = io::read_csv(path);
  const std::size_t id = table.column("sample_id");
  const std::size_t a = table.column("system_a");
  const std::size_t b = table.column("system_b");
  const std::size_t outcome = table.column("outcome");
  std::vector<stats::Vote> votes;
  votes.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    votes.push_back({row[id], row[a], row[b], stats::outcome_from_string(row[outcome])});
  }
  return votes;
}

}  // namespace

int cmd_stats(const StatsInputs& inputs, const RunConfig& raw_cfg,
              const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(raw_cfg, opts);
  const bool correlations = inputs.metric_csv || inputs.human_csv;
  if (correlations && !(inputs.metric_csv && inputs.human_csv)) {
    throw UsageError("--metric and --human must be given together");
  }
  if (!correlations && !inputs.votes_csv) {
    throw UsageError("give --metric and --human, or --votes");
  }
  ordered_json out;
  if (correlations) {
    out["correlation"] = correlation_stats(read_scores(*inputs.metric_csv),
                                           read_scores(*inputs.human_csv));
  }
  if (inputs.votes_csv) {
    const auto votes = read_votes(*inputs.votes_csv);
    const stats::EloMode mode = inputs.mode.value_or(cfg.stats.mode);
    const auto ratings = stats::elo_ratings(votes, mode, cfg.stats.elo);
    ordered_json r = stats::ratings_to_json(ratings, mode);
    r["n_votes"] = votes.size();
    std::vector<std::pair<std::string, double>> order(ratings.begin(), ratings.end());
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    r["ranking"] = ordered_json::array();
    for (const auto& [name, value] : order) r["ranking"].push_back(name);
    out["ratings"] = r;
  }
  io::write_text_atomic(opts.out_dir / "stats.json", out.dump(2) + "\n");
  return exit_codes::kOk;
}

}  // namespace capeval
