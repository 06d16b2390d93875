#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xshot/backend.hpp"
#include "xshot/template.hpp"

namespace xshot {

enum class ScoringKind {
  sum_logprob,
  mean_logprob,
  mean_skip_common_prefix,
  common_suffix_logprob,
  uncond_normalized,
  char_normalized,
};

std::string_view to_string(ScoringKind kind);
/// Accepts the long names ("mean-skip-common-prefix") and the CLI short
/// names (sum, mean, mean-skip-prefix, suffix, uncond, char).
ScoringKind parse_scoring_kind(std::string_view name);

inline constexpr std::string_view kDefaultAnswerContext = "Answer: ";

class ScoringFunction {
 public:
  explicit ScoringFunction(ScoringKind kind = ScoringKind::mean_skip_common_prefix);
  static ScoringFunction uncond_normalized(std::string answer_context = std::string(kDefaultAnswerContext));

  ScoringKind kind() const { return kind_; }
  /// Only meaningful for uncond_normalized.
  const std::string& answer_context() const { return answer_context_; }

 private:
  ScoringKind kind_;
  std::string answer_context_;
};

struct CalibrationSpec {
  bool enabled = false;
  std::vector<std::string> content_free_inputs{"N/A", "", "[MASK]"};

  void validate() const;
};

struct CandidateScore {
  std::size_t candidate_index = 0;
  double value = 0.0;
  std::size_t token_count = 0;
  std::size_t char_count = 0;
};

std::size_t common_token_prefix(std::span<const std::vector<TokenId>> sequences);
std::size_t common_token_suffix(std::span<const std::vector<TokenId>> sequences);

/// sigma(M, P(x, y)) for every candidate prompt.
std::vector<CandidateScore> score_candidates(const LanguageModel& model, std::span<const InstantiatedPrompt> prompts,
                                             const ScoringFunction& fn);

/// Scores -> probabilities normalized over the candidate set.
std::vector<double> candidate_probabilities(std::span<const CandidateScore> scores);

/// Diagonal reweighting: adjusted_i = raw_i / cf_i.
std::vector<double> calibrate(std::span<const double> raw, const CalibrationSpec& spec, std::span<const double> cf);

/// Element-wise mean of per-input probability vectors.
std::vector<double> average_probabilities(std::span<const std::vector<double>> per_input);

/// Argmax; exact ties go to the lowest index. Throws on NaN.
std::size_t select(std::span<const double> values);
std::size_t select(std::span<const CandidateScore> scores);

}  // namespace xshot
