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

#ifndef CAPEVAL_FEEDQUILL_HPP_
#define CAPEVAL_FEEDQUILL_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "capeval/backend.hpp"
#include "capeval/decomposer.hpp"
#include "capeval/templates.hpp"
#include "capeval/units.hpp"
#include "json.hpp"

namespace capeval {

enum class Channel { kPrecision, kRichness };

std::string to_string(Channel channel);
Channel channel_from_string(const std::string& s);

/// Verification outcome of one sampled response.
struct CandidateScore {
  std::size_t candidate_index = 0;
  double c_p = 0.0;         // fraction of units judged correct
  std::size_t c_r = 0;      // number of units
  std::vector<bool> per_unit_verdicts;
  bool degenerate = false;  // no units

  double channel_score(Channel channel) const {
    return channel == Channel::kPrecision ? c_p : static_cast<double>(c_r);
  }
};

/// Builds the score from verdicts; c_p = mean(verdicts), c_r = count.
CandidateScore candidate_score_from_verdicts(std::size_t index,
                                             std::vector<bool> verdicts);

/// Ordered candidate pair, preferred first.
struct RankedPair {
  std::size_t preferred = 0;
  std::size_t rejected = 0;
  double preferred_score = 0.0;
  double rejected_score = 0.0;
  double margin = 0.0;
};

struct PreferencePair {
  CaptionSample context;
  std::string preferred;
  std::string rejected;
  Channel channel = Channel::kPrecision;
  double margin = 0.0;
  double preferred_score = 0.0;
  double rejected_score = 0.0;
};

struct PairOptions {
  double min_margin = 0.0;
  /// Richness pairs only: both candidates need c_p >= floor. Off by default.
  std::optional<double> precision_floor;
};

/// Score gaps within this of the margin count as not exceeding it, so
/// rounding noise in c_p never produces a pair.
inline constexpr double kMarginTolerance = 1e-12;

/// One pair per unordered candidate pair whose channel scores differ by more
/// than the margin. Throws TooFewCandidates for fewer than two.
std::vector<RankedPair> build_pairs(std::span<const CandidateScore> scores,
                                    Channel channel,
                                    const PairOptions& options = {});

struct FeedQuillConfig {
  std::string generator;              // backend sampling candidates
  DecompositionConfig decomposer;     // backend decomposing candidates
  std::vector<std::string> ensemble;  // yes/no verifiers
  int n_candidates = 4;
  std::int64_t seed = 0;
  PairOptions pairs;
  std::size_t max_parallel_samples = 4;
};

/// Decomposes a candidate and verifies every unit with the ensemble.
/// A candidate that decomposes to nothing scores c_p = c_r = 0, degenerate.
CandidateScore score_candidate(const std::string& candidate, std::size_t index,
                               const CaptionSample& sample,
                               const std::optional<ImageAttachment>& image,
                               const FeedQuillConfig& cfg, Gateway& gateway,
                               const TemplateStore& templates);

struct DatasetResult {
  std::vector<PreferencePair> precision_pairs;  // D
  std::vector<PreferencePair> richness_pairs;   // D_r
  std::vector<std::pair<std::string, std::string>> failed_samples;  // id, why
  std::size_t failed_backend_samples = 0;
};

using ImageLoader =
    std::function<std::optional<ImageAttachment>(const CaptionSample&)>;

/// Samples, scores and pairs every sample. Failing samples are logged and
/// skipped; throws the first failure if every sample fails.
DatasetResult generate_dataset(std::span<const CaptionSample> samples,
                               const FeedQuillConfig& cfg, Gateway& gateway,
                               const TemplateStore& templates,
                               const ImageLoader& load_image = {});

/// {"sample_id", "prompt", "image_ref", "chosen", "rejected", "channel",
///  "margin", "chosen_score", "rejected_score"}
nlohmann::ordered_json to_json(const PreferencePair& pair);
PreferencePair preference_pair_from_json(const nlohmann::json& j);

void write_pairs_jsonl(const std::filesystem::path& path,
                       std::span<const PreferencePair> pairs);
std::vector<PreferencePair> read_pairs_jsonl(const std::filesystem::path& path);

}  // namespace capeval

#endif  // CAPEVAL_FEEDQUILL_HPP_
