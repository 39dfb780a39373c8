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

#include "capeval/verifier.hpp"

#include <spdlog/spdlog.h>

#include <exception>
#include <future>

#include "capeval/error.hpp"
#include "capeval/matcher.hpp"
#include "capeval/reply_alignment.hpp"
#include "capeval/text.hpp"

namespace capeval {

std::string build_verification_prompt(const UnitSet& pred,
                                      std::string_view reference,
                                      const TemplateStore& templates,
                                      const std::string& template_id) {
  return render_template(
      templates.get(template_id),
      {{placeholders::kReferenceCaption, std::string(reference)},
       {placeholders::kUnits, predicted_units_json(pred).dump()}});
}

UnitSet apply_verdicts(const UnitSet& pred, const nlohmann::json& reply) {
  const nlohmann::json entries = as_entry_list(reply);
  const ReplyAlignment alignment = align_reply(pred.units, entries);
  if (alignment.positional_fallbacks > 0) {
    spdlog::warn("verification reply: {} entries aligned by position",
                 alignment.positional_fallbacks);
  }
  UnitSet out = pred;
  std::size_t unreported = 0;
  for (std::size_t i = 0; i < out.units.size(); ++i) {
    auto& unit = out.units[i];
    unit.verified = false;
    const auto& slot = alignment.entry_for_unit[i];
    if (!slot || !entries[*slot].is_object() ||
        !entries[*slot].contains("verification")) {
      ++unreported;
      continue;
    }
    const auto& v = entries[*slot]["verification"];
    if (v.is_boolean()) {
      unit.verified = v.get<bool>();
    } else if (v.is_number()) {
      unit.verified = v.get<double>() == 1.0;
    } else if (v.is_string()) {
      const std::string s = text::trim(v.get<std::string>());
      unit.verified = s == "1" || parse_yes_no(s) || s == "true";
    }
  }
  if (unreported > 0) {
    spdlog::warn("verification reply omitted {} of {} units; marked incorrect",
                 unreported, out.units.size());
  }
  return out;
}

UnitSet verify_dcscore(const UnitSet& pred, std::string_view reference,
                       const std::optional<ImageAttachment>& image,
                       const VerifyConfig& cfg, Gateway& gateway,
                       const TemplateStore& templates) {
  if (pred.empty()) throw EmptyUnitSet("nothing to verify");
  ChatRequest req;
  req.user = build_verification_prompt(pred, reference, templates, cfg.template_id);
  req.image = image;
  req.decode = DecodeMode::kJsonExpected;
  return apply_verdicts(pred, gateway.complete_json(cfg.backend, req));
}

std::string build_feedquill_prompt(std::string_view statement,
                                   const TemplateStore& templates) {
  return render_template(templates.get(template_ids::kFeedQuillVerify),
                         {{placeholders::kStatement, std::string(statement)}});
}

bool parse_yes_no(std::string_view reply) {
  return text::first_alpha_token(reply) == "yes";
}

bool majority_vote(std::size_t yes_votes, std::size_t responders) {
  return 2 * yes_votes > responders;
}

bool verify_feedquill(std::string_view statement,
                      const std::vector<std::string>& backends,
                      const std::optional<ImageAttachment>& image,
                      Gateway& gateway, const TemplateStore& templates) {
  if (backends.empty()) throw UsageError("verify_feedquill needs >= 1 backend");
  ChatRequest req;
  req.user = build_feedquill_prompt(statement, templates);
  req.image = image;

  std::vector<std::future<std::string>> replies;
  replies.reserve(backends.size());
  for (const auto& name : backends) {
    replies.push_back(std::async(std::launch::async, [&gateway, name, req] {
      return gateway.complete(name, req);
    }));
  }
  std::size_t yes = 0;
  std::size_t responders = 0;
  std::exception_ptr last_error;
  for (std::size_t i = 0; i < replies.size(); ++i) {
    try {
      const bool vote = parse_yes_no(replies[i].get());
      ++responders;
      yes += vote ? 1 : 0;
    } catch (const std::exception& e) {
      spdlog::warn("ensemble backend '{}' failed; excluded from vote: {}",
                   backends[i], e.what());
      last_error = std::current_exception();
    }
  }
  if (responders == 0) std::rethrow_exception(last_error);
  return majority_vote(yes, responders);
}

}  // namespace capeval
