#include "xshot/scoring.hpp"

#include <algorithm>
#include <cmath>

#include "xshot/error.hpp"
#include "xshot/text.hpp"

namespace xshot {

namespace {

constexpr std::pair<ScoringKind, std::string_view> kNames[] = {
    {ScoringKind::sum_logprob, "sum-logprob"},
    {ScoringKind::mean_logprob, "mean-logprob"},
    {ScoringKind::mean_skip_common_prefix, "mean-skip-common-prefix"},
    {ScoringKind::common_suffix_logprob, "common-suffix-logprob"},
    {ScoringKind::uncond_normalized, "uncond-normalized"},
    {ScoringKind::char_normalized, "char-normalized"},
};

constexpr std::pair<ScoringKind, std::string_view> kShortNames[] = {
    {ScoringKind::sum_logprob, "sum"},
    {ScoringKind::mean_logprob, "mean"},
    {ScoringKind::mean_skip_common_prefix, "mean-skip-prefix"},
    {ScoringKind::common_suffix_logprob, "suffix"},
    {ScoringKind::uncond_normalized, "uncond"},
    {ScoringKind::char_normalized, "char"},
};

double sum_range(const std::vector<double>& values, std::size_t begin, std::size_t end) {
  double total = 0.0;
  for (std::size_t i = begin; i < end; ++i) total += values[i];
  return total;
}

void require_mask(const InstantiatedPrompt& prompt, std::size_t index) {
  if (prompt.mask_span.size() == 0) {
    throw Error("candidate " + std::to_string(index) + " has an empty mask span");
  }
}

}  // namespace

std::string_view to_string(ScoringKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "?";
}

ScoringKind parse_scoring_kind(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  for (const auto& [k, n] : kShortNames) {
    if (n == name) return k;
  }
  throw Error("unknown scoring function '" + std::string(name) + "'");
}

ScoringFunction::ScoringFunction(ScoringKind kind) : kind_(kind) {
  if (kind_ == ScoringKind::uncond_normalized) answer_context_ = std::string(kDefaultAnswerContext);
}

ScoringFunction ScoringFunction::uncond_normalized(std::string answer_context) {
  ScoringFunction fn(ScoringKind::uncond_normalized);
  fn.answer_context_ = std::move(answer_context);
  return fn;
}

void CalibrationSpec::validate() const {
  if (enabled && content_free_inputs.empty()) throw Error("calibration needs at least one content-free input");
}

std::size_t common_token_prefix(std::span<const std::vector<TokenId>> sequences) {
  if (sequences.size() < 2) throw Error("common prefix needs at least 2 sequences");
  std::size_t length = sequences.front().size();
  for (const auto& seq : sequences.subspan(1)) {
    const auto limit = std::min(length, seq.size());
    std::size_t i = 0;
    while (i < limit && seq[i] == sequences.front()[i]) ++i;
    length = i;
  }
  return length;
}

std::size_t common_token_suffix(std::span<const std::vector<TokenId>> sequences) {
  if (sequences.size() < 2) throw Error("common suffix needs at least 2 sequences");
  const auto& first = sequences.front();
  std::size_t length = first.size();
  for (const auto& seq : sequences.subspan(1)) {
    const auto limit = std::min(length, seq.size());
    std::size_t i = 0;
    while (i < limit && seq[seq.size() - 1 - i] == first[first.size() - 1 - i]) ++i;
    length = i;
  }
  return length;
}

std::vector<CandidateScore> score_candidates(const LanguageModel& model, std::span<const InstantiatedPrompt> prompts,
                                             const ScoringFunction& fn) {
  if (prompts.size() < 2) throw Error("scoring needs at least 2 candidates");
  const auto n = prompts.size();
  std::vector<CandidateScore> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i].candidate_index = i;
    scores[i].char_count = text::code_point_count(prompts[i].masked_text());
  }

  switch (fn.kind()) {
    case ScoringKind::sum_logprob:
    case ScoringKind::mean_logprob:
    case ScoringKind::mean_skip_common_prefix:
    case ScoringKind::common_suffix_logprob: {
      std::vector<ScoredTokens> full(n);
      std::vector<std::vector<TokenId>> tokens(n);
      for (std::size_t i = 0; i < n; ++i) {
        full[i] = model.score(prompts[i].text);
        full[i].validate();
        tokens[i] = full[i].tokens;
      }
      std::size_t skip = 0;
      std::size_t suffix = 0;
      if (fn.kind() == ScoringKind::mean_skip_common_prefix) {
        skip = common_token_prefix(tokens);
      } else if (fn.kind() == ScoringKind::common_suffix_logprob) {
        suffix = common_token_suffix(tokens);
        if (suffix == 0) throw Error("candidates share no common suffix");
      }
      for (std::size_t i = 0; i < n; ++i) {
        const auto& lp = full[i].logprobs;
        std::size_t begin = 0;
        if (fn.kind() == ScoringKind::mean_skip_common_prefix) begin = skip;
        if (fn.kind() == ScoringKind::common_suffix_logprob) begin = lp.size() - suffix;
        const std::size_t count = lp.size() - begin;
        if (count == 0) {
          throw Error(fn.kind() == ScoringKind::mean_skip_common_prefix
                          ? "candidate " + std::to_string(i) + " has no tokens after the common prefix"
                          : "candidate " + std::to_string(i) + " has no tokens");
        }
        const double total = sum_range(lp, begin, lp.size());
        scores[i].token_count = count;
        scores[i].value = (fn.kind() == ScoringKind::mean_logprob || fn.kind() == ScoringKind::mean_skip_common_prefix)
                              ? total / static_cast<double>(count)
                              : total;
      }
      break;
    }
    case ScoringKind::uncond_normalized: {
      for (std::size_t i = 0; i < n; ++i) {
        require_mask(prompts[i], i);
        const auto completion = prompts[i].masked_text();
        const auto conditional = model.conditional_score(prompts[i].before_mask(), completion);
        const auto unconditional = model.conditional_score(fn.answer_context(), completion);
        conditional.validate();
        unconditional.validate();
        if (conditional.size() == 0) throw Error("candidate " + std::to_string(i) + " has no tokens");
        scores[i].token_count = conditional.size();
        scores[i].value = conditional.sum() - unconditional.sum();
      }
      break;
    }
    case ScoringKind::char_normalized: {
      for (std::size_t i = 0; i < n; ++i) {
        require_mask(prompts[i], i);
        const auto region = model.conditional_score(prompts[i].before_mask(), prompts[i].masked_text());
        region.validate();
        if (region.size() == 0) throw Error("candidate " + std::to_string(i) + " has no tokens");
        scores[i].token_count = region.size();
        scores[i].value = region.sum() / static_cast<double>(scores[i].char_count);
      }
      break;
    }
  }
  return scores;
}

std::vector<double> candidate_probabilities(std::span<const CandidateScore> scores) {
  if (scores.empty()) throw Error("no candidate scores");
  double peak = -std::numeric_limits<double>::infinity();
  for (const auto& s : scores) peak = std::max(peak, s.value);
  std::vector<double> probs;
  probs.reserve(scores.size());
  double total = 0.0;
  for (const auto& s : scores) {
    probs.push_back(std::exp(s.value - peak));
    total += probs.back();
  }
  for (auto& p : probs) p /= total;
  return probs;
}

std::vector<double> calibrate(std::span<const double> raw, const CalibrationSpec& spec, std::span<const double> cf) {
  spec.validate();
  if (!spec.enabled) return {raw.begin(), raw.end()};
  if (raw.size() != cf.size()) throw Error("calibration: raw and content-free arity differ");
  std::vector<double> adjusted(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!(cf[i] > 0.0)) throw Error("calibration: zero content-free probability for candidate " + std::to_string(i));
    adjusted[i] = raw[i] / cf[i];
  }
  return adjusted;
}

std::vector<double> average_probabilities(std::span<const std::vector<double>> per_input) {
  if (per_input.empty()) throw Error("no content-free probabilities to average");
  std::vector<double> mean(per_input.front().size(), 0.0);
  for (const auto& probs : per_input) {
    if (probs.size() != mean.size()) throw Error("content-free probability arity mismatch");
    for (std::size_t i = 0; i < probs.size(); ++i) mean[i] += probs[i];
  }
  for (auto& m : mean) m /= static_cast<double>(per_input.size());
  return mean;
}

std::size_t select(std::span<const double> values) {
  if (values.empty()) throw Error("select: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i])) throw Error("select: NaN score for candidate " + std::to_string(i));
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t select(std::span<const CandidateScore> scores) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const auto& s : scores) values.push_back(s.value);
  return select(values);
}

}  // namespace xshot
