#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xshot/backend.hpp"
#include "xshot/task.hpp"
#include "xshot/template.hpp"

namespace xshot {

enum class SamplingStrategy { random_total, per_class_uniform };

std::string_view to_string(SamplingStrategy strategy);
SamplingStrategy parse_sampling_strategy(std::string_view name);

struct ShotSpec {
  std::size_t k = 0;
  SamplingStrategy strategy = SamplingStrategy::random_total;
  std::uint64_t seed = 0;
};

struct SeparatorSpec {
  std::string separator = "\n";
};

struct CrossLingualSpec {
  LanguageCode demo_lang;
  TemplateMode template_mode = TemplateMode::same_language();
};

struct FewShotContext {
  std::vector<InstantiatedPrompt> demos;  // kept, in sampling order
  std::string separator;
  std::size_t kept_count = 0;
  std::size_t dropped_count = 0;
};

/// random-total: k distinct pool members. per-class-uniform: k members of
/// every label in `label_space`, then one seeded shuffle of the concatenation.
/// `exclude_id` is never drawn.
std::vector<Example> sample_demos(std::span<const Example> pool, const ShotSpec& spec, std::string_view exclude_id,
                                  std::span<const std::string> label_space = {});

/// One string per candidate: demos joined by the separator, then separator + target.
/// Mask spans are shifted to the composed text.
std::vector<InstantiatedPrompt> build_context(std::span<const InstantiatedPrompt> demos,
                                              std::span<const InstantiatedPrompt> targets, const SeparatorSpec& sep);

/// Token count of the composed string for each candidate.
std::size_t max_candidate_tokens(const LanguageModel& model, std::span<const InstantiatedPrompt> demos,
                                 std::span<const InstantiatedPrompt> targets, const SeparatorSpec& sep);

/// Drops whole demonstrations from the front until every candidate fits in
/// context_length - reserve_tokens. Throws if the targets alone do not fit.
FewShotContext truncate_to_fit(std::span<const InstantiatedPrompt> demos, std::span<const InstantiatedPrompt> targets,
                               const SeparatorSpec& sep, const LanguageModel& model, std::size_t reserve_tokens = 0);

struct MaxFitRow {
  std::string task;
  std::string lang;
  double mean_fit = 0.0;
  std::size_t n_examples = 0;
};

struct MaxFitOptions {
  std::string eval_split = "test";
  TemplateMode template_mode = TemplateMode::same_language();
  SeparatorSpec sep;
  std::uint64_t seed = 0;
  std::size_t reserve_tokens = 0;
};

/// Mean over evaluated examples of the largest k whose demonstrations fit.
std::vector<MaxFitRow> max_fit_stats(const Task& task, const TemplateSet& templates, const LanguageModel& model,
                                     const MaxFitOptions& options);

/// CSV with header "task,lang,mean_fit,n_examples".
std::string max_fit_csv(std::span<const MaxFitRow> rows);

/// Instantiated prompts for every candidate of `example` (or the generation query).
std::vector<InstantiatedPrompt> candidate_prompts(const PromptTemplate& tmpl, const Example& example, const Task& task);

/// The demonstration with its gold answer substituted.
InstantiatedPrompt gold_prompt(const PromptTemplate& tmpl, const Example& example);

}  // namespace xshot
