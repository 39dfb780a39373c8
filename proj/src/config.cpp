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

#include "capeval/config.hpp"

#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <set>

#include "capeval/error.hpp"

namespace capeval {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void check_keys(const json& j, std::string_view section,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be an object");
  const std::set<std::string_view> known(allowed);
  for (const auto& [key, value] : j.items()) {
    if (known.count(key) == 0) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(section));
    }
  }
}

json interpolate_tree(const json& j) {
  if (j.is_string()) return interpolate_env(j.get<std::string>());
  if (j.is_array()) {
    json out = json::array();
    for (const auto& e : j) out.push_back(interpolate_tree(e));
    return out;
  }
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = interpolate_tree(v);
    return out;
  }
  return j;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

BackendSpec backend_from_json(const json& j, const fs::path& base) {
  check_keys(j, "backend", {"name", "kind", "endpoint", "endpoint_path", "model_id",
                            "credentials_env", "fixture_dir", "max_parallel",
                            "timeout_seconds"});
  BackendSpec b;
  b.name = get_or<std::string>(j, "name", "");
  b.kind = backend_kind_from_string(get_or<std::string>(j, "kind", "mock-fixture"));
  b.endpoint = get_or<std::string>(j, "endpoint", "");
  b.endpoint_path = get_or<std::string>(j, "endpoint_path", b.endpoint_path);
  b.model_id = get_or<std::string>(j, "model_id", "");
  b.credentials_env = get_or<std::string>(j, "credentials_env", "");
  const auto fixtures = get_or<std::string>(j, "fixture_dir", "");
  if (!fixtures.empty()) b.fixture_dir = resolve(base, fixtures);
  b.max_parallel = get_or<int>(j, "max_parallel", b.max_parallel);
  b.timeout_seconds = get_or<double>(j, "timeout_seconds", b.timeout_seconds);
  b.validate();
  return b;
}

void read_ppo(const json& j, alignment::PPOConfig<double>& p) {
  check_keys(j, "align.ppo",
             {"lr_actor", "lr_critic", "batch_size", "kl_beta", "gamma", "lambda",
              "ppo_epochs", "n_minibatches", "clip_eps", "value_clip_eps", "alpha_r",
              "temperature", "top_p", "adam_beta1", "adam_beta2", "adam_eps",
              "linear_schedule"});
  p.lr_actor = get_or(j, "lr_actor", p.lr_actor);
  p.lr_critic = get_or(j, "lr_critic", p.lr_critic);
  p.batch_size = get_or(j, "batch_size", p.batch_size);
  p.kl_beta = get_or(j, "kl_beta", p.kl_beta);
  p.gamma = get_or(j, "gamma", p.gamma);
  p.lambda = get_or(j, "lambda", p.lambda);
  p.ppo_epochs = get_or(j, "ppo_epochs", p.ppo_epochs);
  p.n_minibatches = get_or(j, "n_minibatches", p.n_minibatches);
  p.clip_eps = get_or(j, "clip_eps", p.clip_eps);
  p.value_clip_eps = get_or(j, "value_clip_eps", p.value_clip_eps);
  p.alpha_r = get_or(j, "alpha_r", p.alpha_r);
  p.temperature = get_or(j, "temperature", p.temperature);
  p.top_p = get_or(j, "top_p", p.top_p);
  p.adam_beta1 = get_or(j, "adam_beta1", p.adam_beta1);
  p.adam_beta2 = get_or(j, "adam_beta2", p.adam_beta2);
  p.adam_eps = get_or(j, "adam_eps", p.adam_eps);
  p.linear_schedule = get_or(j, "linear_schedule", p.linear_schedule);
}

std::optional<std::size_t> optional_size(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto v = get_or<long long>(j, key, 0);
  if (v < 1) throw ConfigError(std::string(key) + " must be positive");
  return static_cast<std::size_t>(v);
}

template <typename T>
ordered_json optional_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

}  // namespace

std::string interpolate_env(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 2, "${") == 0) {
      const auto close = text.find('}', i + 2);
      if (close == std::string_view::npos) {
        throw ConfigError("unterminated ${ in '" + std::string(text) + "'");
      }
      const std::string name(text.substr(i + 2, close - i - 2));
      const char* value = std::getenv(name.c_str());
      if (name.empty() || value == nullptr) {
        throw ConfigError("environment variable '" + name + "' is not set");
      }
      out += value;
      i = close + 1;
    } else {
      out += text[i++];
    }
  }
  return out;
}

const BackendSpec* RunConfig::find_backend(const std::string& name) const {
  for (const auto& b : backends) {
    if (b.name == name) return &b;
  }
  return nullptr;
}

void RunConfig::validate() const {
  std::set<std::string> names;
  for (const auto& b : backends) {
    if (!names.insert(b.name).second) {
      throw ConfigError("duplicate backend name '" + b.name + "'");
    }
  }
  auto check = [&](const std::string& role, const std::string& name) {
    if (!name.empty() && find_backend(name) == nullptr) {
      throw ConfigError(role + " refers to unknown backend '" + name + "'");
    }
  };
  check("score.decomposer", score.decomposer);
  check("score.matcher", score.matcher);
  check("score.verifier", score.verifier);
  if (score.oracle_decomposer) check("score.oracle_decomposer", *score.oracle_decomposer);
  check("prefgen.generator", prefgen.generator);
  check("prefgen.decomposer", prefgen.decomposer);
  for (const auto& e : prefgen.ensemble) check("prefgen.ensemble", e);
  if (prefgen.min_margin < 0.0) throw ConfigError("prefgen.min_margin must be >= 0");
  if (score.max_parallel_samples < 1 || prefgen.max_parallel_samples < 1) {
    throw ConfigError("max_parallel_samples must be positive");
  }
  if (align.steps < 0 || align.eval_samples < 1 || align.init_stddev < 0.0) {
    throw ConfigError("invalid align settings");
  }
  if (align.rm.epochs < 0 || align.rm.holdout_fraction < 0.0 ||
      align.rm.holdout_fraction >= 1.0) {
    throw ConfigError("invalid align.rm settings");
  }
  try {
    align.space.validate();
    align.ppo.validate();
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
}

RunConfig config_from_json(const json& raw, const fs::path& base_dir) {
  const json j = interpolate_tree(raw);
  check_keys(j, "config", {"backends", "templates_dir", "cache_dir", "seed", "score",
                           "prefgen", "align", "stats"});
  RunConfig cfg;
  try {
    if (j.contains("backends")) {
      for (const auto& b : j.at("backends")) cfg.backends.push_back(backend_from_json(b, base_dir));
    }
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
  const auto templates = get_or<std::string>(j, "templates_dir", "");
  if (!templates.empty()) cfg.templates_dir = resolve(base_dir, templates);
  const auto cache = get_or<std::string>(j, "cache_dir", "");
  if (!cache.empty()) cfg.cache_dir = resolve(base_dir, cache);
  cfg.seed = get_or<std::int64_t>(j, "seed", 0);

  const std::string only = cfg.backends.size() == 1 ? cfg.backends.front().name : "";
  const json score = get_or<json>(j, "score", json::object());
  check_keys(score, "score", {"decomposer", "matcher", "verifier", "max_units",
                              "oracle_decomposer", "max_parallel_samples"});
  cfg.score.decomposer = get_or<std::string>(score, "decomposer", only);
  cfg.score.matcher = get_or<std::string>(score, "matcher", only);
  cfg.score.verifier = get_or<std::string>(score, "verifier", only);
  cfg.score.max_units = optional_size(score, "max_units");
  if (score.contains("oracle_decomposer") && !score.at("oracle_decomposer").is_null()) {
    cfg.score.oracle_decomposer = score.at("oracle_decomposer").get<std::string>();
  }
  cfg.score.max_parallel_samples =
      get_or<std::size_t>(score, "max_parallel_samples", cfg.score.max_parallel_samples);

  const json pref = get_or<json>(j, "prefgen", json::object());
  check_keys(pref, "prefgen", {"generator", "decomposer", "ensemble", "n_candidates",
                               "min_margin", "precision_floor", "prompt_pool",
                               "max_parallel_samples"});
  cfg.prefgen.generator = get_or<std::string>(pref, "generator", only);
  cfg.prefgen.decomposer = get_or<std::string>(pref, "decomposer", only);
  cfg.prefgen.ensemble = get_or<std::vector<std::string>>(
      pref, "ensemble", only.empty() ? std::vector<std::string>{} : std::vector<std::string>{only});
  cfg.prefgen.n_candidates = get_or(pref, "n_candidates", cfg.prefgen.n_candidates);
  cfg.prefgen.min_margin = get_or(pref, "min_margin", cfg.prefgen.min_margin);
  if (pref.contains("precision_floor") && !pref.at("precision_floor").is_null()) {
    cfg.prefgen.precision_floor = pref.at("precision_floor").get<double>();
  }
  cfg.prefgen.prompt_pool = get_or<std::vector<std::string>>(pref, "prompt_pool", {});
  cfg.prefgen.max_parallel_samples =
      get_or<std::size_t>(pref, "max_parallel_samples", cfg.prefgen.max_parallel_samples);

  const json align = get_or<json>(j, "align", json::object());
  check_keys(align, "align", {"vocab_size", "max_len", "steps", "init_stddev",
                              "eval_samples", "rm", "ppo"});
  cfg.align.space.vocab_size = get_or(align, "vocab_size", cfg.align.space.vocab_size);
  cfg.align.space.max_len = get_or(align, "max_len", cfg.align.space.max_len);
  cfg.align.steps = get_or(align, "steps", cfg.align.steps);
  cfg.align.init_stddev = get_or(align, "init_stddev", cfg.align.init_stddev);
  cfg.align.eval_samples = get_or(align, "eval_samples", cfg.align.eval_samples);
  const json rm = get_or<json>(align, "rm", json::object());
  check_keys(rm, "align.rm", {"epochs", "learning_rate", "holdout_fraction"});
  cfg.align.rm.epochs = get_or(rm, "epochs", cfg.align.rm.epochs);
  cfg.align.rm.learning_rate = get_or(rm, "learning_rate", cfg.align.rm.learning_rate);
  cfg.align.rm.holdout_fraction = get_or(rm, "holdout_fraction", cfg.align.rm.holdout_fraction);
  read_ppo(get_or<json>(align, "ppo", json::object()), cfg.align.ppo);

  const json st = get_or<json>(j, "stats", json::object());
  check_keys(st, "stats", {"mode", "initial", "k_factor", "scale", "prior_games",
                           "tolerance"});
  try {
    cfg.stats.mode = stats::elo_mode_from_string(get_or<std::string>(st, "mode", "bradley-terry"));
  } catch (const UsageError& e) {
    throw ConfigError(e.what());
  }
  cfg.stats.elo.initial = get_or(st, "initial", cfg.stats.elo.initial);
  cfg.stats.elo.k_factor = get_or(st, "k_factor", cfg.stats.elo.k_factor);
  cfg.stats.elo.scale = get_or(st, "scale", cfg.stats.elo.scale);
  cfg.stats.elo.prior_games = get_or(st, "prior_games", cfg.stats.elo.prior_games);
  cfg.stats.elo.tolerance = get_or(st, "tolerance", cfg.stats.elo.tolerance);

  cfg.validate();
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

void apply_backend_override(RunConfig& cfg, const std::string& backend) {
  if (cfg.find_backend(backend) == nullptr) {
    throw ConfigError("--backend names unknown backend '" + backend + "'");
  }
  cfg.score.decomposer = cfg.score.matcher = cfg.score.verifier = backend;
  if (cfg.score.oracle_decomposer) cfg.score.oracle_decomposer = backend;
  cfg.prefgen.generator = cfg.prefgen.decomposer = backend;
  cfg.prefgen.ensemble = {backend};
}

ordered_json to_json(const RunConfig& cfg) {
  ordered_json j;
  j["backends"] = ordered_json::array();
  for (const auto& b : cfg.backends) {
    j["backends"].push_back({{"name", b.name},
                             {"kind", to_string(b.kind)},
                             {"endpoint", b.endpoint},
                             {"endpoint_path", b.endpoint_path},
                             {"model_id", b.model_id},
                             {"credentials_env", b.credentials_env},
                             {"fixture_dir", b.fixture_dir.generic_string()},
                             {"max_parallel", b.max_parallel},
                             {"timeout_seconds", b.timeout_seconds}});
  }
  j["templates_dir"] = cfg.templates_dir ? ordered_json(cfg.templates_dir->generic_string())
                                         : ordered_json(nullptr);
  j["cache_dir"] = cfg.cache_dir.generic_string();
  j["seed"] = cfg.seed;
  j["score"] = {{"decomposer", cfg.score.decomposer},
                {"matcher", cfg.score.matcher},
                {"verifier", cfg.score.verifier},
                {"max_units", optional_json(cfg.score.max_units)},
                {"oracle_decomposer", optional_json(cfg.score.oracle_decomposer)},
                {"max_parallel_samples", cfg.score.max_parallel_samples}};
  j["prefgen"] = {{"generator", cfg.prefgen.generator},
                  {"decomposer", cfg.prefgen.decomposer},
                  {"ensemble", cfg.prefgen.ensemble},
                  {"n_candidates", cfg.prefgen.n_candidates},
                  {"min_margin", cfg.prefgen.min_margin},
                  {"precision_floor", optional_json(cfg.prefgen.precision_floor)},
                  {"prompt_pool", cfg.prefgen.prompt_pool},
                  {"max_parallel_samples", cfg.prefgen.max_parallel_samples}};
  const auto& p = cfg.align.ppo;
  j["align"] = {{"vocab_size", cfg.align.space.vocab_size},
                {"max_len", cfg.align.space.max_len},
                {"steps", cfg.align.steps},
                {"init_stddev", cfg.align.init_stddev},
                {"eval_samples", cfg.align.eval_samples},
                {"rm", {{"epochs", cfg.align.rm.epochs},
                        {"learning_rate", cfg.align.rm.learning_rate},
                        {"holdout_fraction", cfg.align.rm.holdout_fraction}}},
                {"ppo", {{"lr_actor", p.lr_actor},
                         {"lr_critic", p.lr_critic},
                         {"batch_size", p.batch_size},
                         {"kl_beta", p.kl_beta},
                         {"gamma", p.gamma},
                         {"lambda", p.lambda},
                         {"ppo_epochs", p.ppo_epochs},
                         {"n_minibatches", p.n_minibatches},
                         {"clip_eps", p.clip_eps},
                         {"value_clip_eps", p.value_clip_eps},
                         {"alpha_r", p.alpha_r},
                         {"temperature", p.temperature},
                         {"top_p", p.top_p},
                         {"adam_beta1", p.adam_beta1},
                         {"adam_beta2", p.adam_beta2},
                         {"adam_eps", p.adam_eps},
                         {"linear_schedule", p.linear_schedule}}}};
  j["stats"] = {{"mode", stats::to_string(cfg.stats.mode)},
                {"initial", cfg.stats.elo.initial},
                {"k_factor", cfg.stats.elo.k_factor},
                {"scale", cfg.stats.elo.scale},
                {"prior_games", cfg.stats.elo.prior_games},
                {"tolerance", cfg.stats.elo.tolerance}};
  return j;
}

}  // namespace capeval
