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

#include "capeval/feedquill.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <exception>
#include <fstream>

#include "capeval/error.hpp"
#include "capeval/parallel.hpp"
#include "capeval/verifier.hpp"

namespace capeval {

std::string to_string(Channel channel) {
  return channel == Channel::kPrecision ? "precision" : "richness";
}

Channel channel_from_string(const std::string& s) {
  if (s == "precision") return Channel::kPrecision;
  if (s == "richness") return Channel::kRichness;
  throw UsageError("unknown channel: " + s);
}

CandidateScore candidate_score_from_verdicts(std::size_t index,
                                             std::vector<bool> verdicts) {
  CandidateScore s;
  s.candidate_index = index;
  s.c_r = verdicts.size();
  s.degenerate = verdicts.empty();
  std::size_t correct = 0;
  for (bool v : verdicts) correct += v ? 1 : 0;
  s.c_p = verdicts.empty() ? 0.0
                           : static_cast<double>(correct) /
                                 static_cast<double>(verdicts.size());
  s.per_unit_verdicts = std::move(verdicts);
  return s;
}

std::vector<RankedPair> build_pairs(std::span<const CandidateScore> scores,
                                    Channel channel, const PairOptions& options) {
  if (scores.size() < 2) {
    throw TooFewCandidates("need at least two candidates to build pairs");
  }
  auto eligible = [&](const CandidateScore& s) {
    return channel != Channel::kRichness || !options.precision_floor ||
           s.c_p >= *options.precision_floor;
  };
  std::vector<RankedPair> pairs;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = i + 1; j < scores.size(); ++j) {
      if (!eligible(scores[i]) || !eligible(scores[j])) continue;
      const double a = scores[i].channel_score(channel);
      const double b = scores[j].channel_score(channel);
      const double gap = std::abs(a - b);
      if (!(gap > options.min_margin + kMarginTolerance)) continue;
      const bool first_wins = a > b;
      RankedPair p;
      p.preferred = first_wins ? scores[i].candidate_index : scores[j].candidate_index;
      p.rejected = first_wins ? scores[j].candidate_index : scores[i].candidate_index;
      p.preferred_score = std::max(a, b);
      p.rejected_score = std::min(a, b);
      p.margin = gap;
      pairs.push_back(p);
    }
  }
  return pairs;
}

CandidateScore score_candidate(const std::string& candidate, std::size_t index,
                               const CaptionSample& sample,
                               const std::optional<ImageAttachment>& image,
                               const FeedQuillConfig& cfg, Gateway& gateway,
                               const TemplateStore& templates) {
  UnitSet units;
  try {
    units = decompose(candidate, cfg.decomposer, gateway, templates);
  } catch (const EmptyDecomposition&) {
    spdlog::warn("sample {} candidate {}: no units; scored degenerate",
                 sample.sample_id, index);
    return candidate_score_from_verdicts(index, {});
  } catch (const EmptyCaption&) {
    spdlog::warn("sample {} candidate {}: empty response; scored degenerate",
                 sample.sample_id, index);
    return candidate_score_from_verdicts(index, {});
  }
  std::vector<bool> verdicts;
  verdicts.reserve(units.size());
  for (const auto& unit : units.units) {
    verdicts.push_back(
        verify_feedquill(unit.fact, cfg.ensemble, image, gateway, templates));
  }
  return candidate_score_from_verdicts(index, std::move(verdicts));
}

namespace {

struct SampleOutcome {
  std::vector<PreferencePair> precision;
  std::vector<PreferencePair> richness;
  std::exception_ptr error;
  std::string message;
  bool backend_failure = false;
};

SampleOutcome process_sample(const CaptionSample& sample,
                             const FeedQuillConfig& cfg, Gateway& gateway,
                             const TemplateStore& templates,
                             const ImageLoader& load_image) {
  SampleOutcome out;
  const std::optional<ImageAttachment> image =
      load_image ? load_image(sample) : std::nullopt;
  ChatRequest req;
  req.user = sample.prompt;
  req.image = image;
  req.sampling.seed = cfg.seed;
  const SampleResult sampled =
      gateway.sample_candidates(cfg.generator, req, cfg.n_candidates);
  for (const auto& f : sampled.failures) {
    spdlog::warn("sample {} candidate slot {} failed: {}", sample.sample_id,
                 f.slot, f.message);
  }

  std::vector<std::string> texts;
  std::vector<CandidateScore> scores;
  for (std::size_t i = 0; i < sampled.texts.size(); ++i) {
    if (!sampled.texts[i]) continue;
    scores.push_back(score_candidate(*sampled.texts[i], texts.size(), sample,
                                     image, cfg, gateway, templates));
    texts.push_back(*sampled.texts[i]);
  }
  if (scores.size() < 2) {
    if (!sampled.failures.empty()) {
      std::rethrow_exception(sampled.failures.front().error);
    }
    throw TooFewCandidates("sample " + sample.sample_id +
                           ": fewer than two candidates");
  }

  auto materialize = [&](Channel channel) {
    std::vector<PreferencePair> pairs;
    for (const auto& rp : build_pairs(scores, channel, cfg.pairs)) {
      PreferencePair p;
      p.context = sample;
      p.preferred = texts[rp.preferred];
      p.rejected = texts[rp.rejected];
      p.channel = channel;
      p.margin = rp.margin;
      p.preferred_score = rp.preferred_score;
      p.rejected_score = rp.rejected_score;
      pairs.push_back(std::move(p));
    }
    return pairs;
  };
  out.precision = materialize(Channel::kPrecision);
  out.richness = materialize(Channel::kRichness);
  return out;
}

}  // namespace

DatasetResult generate_dataset(std::span<const CaptionSample> samples,
                               const FeedQuillConfig& cfg, Gateway& gateway,
                               const TemplateStore& templates,
                               const ImageLoader& load_image) {
  if (cfg.n_candidates < 2) {
    throw TooFewCandidates("n_candidates must be >= 2");
  }
  std::vector<SampleOutcome> outcomes(samples.size());
  parallel_for(samples.size(), cfg.max_parallel_samples, [&](std::size_t i) {
    try {
      outcomes[i] = process_sample(samples[i], cfg, gateway, templates, load_image);
    } catch (const BackendError& e) {
      outcomes[i].error = std::current_exception();
      outcomes[i].message = e.what();
      outcomes[i].backend_failure = true;
    } catch (const std::exception& e) {
      outcomes[i].error = std::current_exception();
      outcomes[i].message = e.what();
    }
  });

  DatasetResult result;
  std::exception_ptr first_error;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& o = outcomes[i];
    if (o.error) {
      spdlog::warn("sample {} skipped: {}", samples[i].sample_id, o.message);
      result.failed_samples.emplace_back(samples[i].sample_id, o.message);
      result.failed_backend_samples += o.backend_failure ? 1 : 0;
      if (!first_error) first_error = o.error;
      continue;
    }
    for (auto& p : o.precision) result.precision_pairs.push_back(std::move(p));
    for (auto& p : o.richness) result.richness_pairs.push_back(std::move(p));
  }
  if (!samples.empty() && result.failed_samples.size() == samples.size()) {
    std::rethrow_exception(first_error);
  }
  return result;
}

nlohmann::ordered_json to_json(const PreferencePair& p) {
  nlohmann::ordered_json j;
  j["sample_id"] = p.context.sample_id;
  j["prompt"] = p.context.prompt;
  j["image_ref"] = p.context.image_ref ? nlohmann::ordered_json(*p.context.image_ref)
                                       : nlohmann::ordered_json(nullptr);
  j["chosen"] = p.preferred;
  j["rejected"] = p.rejected;
  j["channel"] = to_string(p.channel);
  j["margin"] = p.margin;
  j["chosen_score"] = p.preferred_score;
  j["rejected_score"] = p.rejected_score;
  return j;
}

PreferencePair preference_pair_from_json(const nlohmann::json& j) {
  PreferencePair p;
  p.context.sample_id = j.at("sample_id").get<std::string>();
  p.context.prompt = j.value("prompt", std::string());
  if (j.contains("image_ref") && j["image_ref"].is_string()) {
    p.context.image_ref = j["image_ref"].get<std::string>();
  }
  p.preferred = j.at("chosen").get<std::string>();
  p.rejected = j.at("rejected").get<std::string>();
  p.channel = channel_from_string(j.at("channel").get<std::string>());
  p.margin = j.value("margin", 0.0);
  p.preferred_score = j.value("chosen_score", 0.0);
  p.rejected_score = j.value("rejected_score", 0.0);
  return p;
}

void write_pairs_jsonl(const std::filesystem::path& path,
                       std::span<const PreferencePair> pairs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : pairs) out << to_json(p).dump() << '\n';
}

std::vector<PreferencePair> read_pairs_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<PreferencePair> pairs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    pairs.push_back(preference_pair_from_json(nlohmann::json::parse(line)));
  }
  return pairs;
}

}  // namespace capeval
