#include "xshot/fewshot.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "xshot/error.hpp"
#include "xshot/random.hpp"

namespace xshot {

std::string_view to_string(SamplingStrategy strategy) {
  return strategy == SamplingStrategy::random_total ? "random-total" : "per-class-uniform";
}

SamplingStrategy parse_sampling_strategy(std::string_view name) {
  if (name == "random-total") return SamplingStrategy::random_total;
  if (name == "per-class-uniform") return SamplingStrategy::per_class_uniform;
  throw Error("unknown sampling strategy '" + std::string(name) + "'");
}

std::vector<Example> sample_demos(std::span<const Example> pool, const ShotSpec& spec, std::string_view exclude_id,
                                  std::span<const std::string> label_space) {
  if (spec.k == 0) return {};
  Rng rng(spec.seed);
  std::vector<const Example*> eligible;
  for (const auto& ex : pool) {
    if (ex.id != exclude_id) eligible.push_back(&ex);
  }

  std::vector<Example> demos;
  if (spec.strategy == SamplingStrategy::random_total) {
    if (eligible.size() < spec.k) {
      throw Error("demonstration pool has " + std::to_string(eligible.size()) + " eligible examples, need " +
                  std::to_string(spec.k));
    }
    for (const auto index : rng.sample_indices(eligible.size(), spec.k)) demos.push_back(*eligible[index]);
    return demos;
  }

  if (label_space.empty()) throw Error("per-class-uniform sampling requires a classification task");
  for (const auto& label : label_space) {
    std::vector<const Example*> members;
    for (const auto* ex : eligible) {
      const auto* cls = std::get_if<ClassLabel>(&ex->payload);
      if (cls == nullptr) throw Error("per-class-uniform sampling requires a classification task");
      if (cls->label == label) members.push_back(ex);
    }
    if (members.empty()) throw Error("class '" + label + "' is absent from the demonstration pool");
    if (members.size() < spec.k) {
      throw Error("class '" + label + "' has " + std::to_string(members.size()) + " pool examples, need " +
                  std::to_string(spec.k));
    }
    for (const auto index : rng.sample_indices(members.size(), spec.k)) demos.push_back(*members[index]);
  }
  rng.shuffle(std::span<Example>(demos));
  return demos;
}

std::vector<InstantiatedPrompt> build_context(std::span<const InstantiatedPrompt> demos,
                                              std::span<const InstantiatedPrompt> targets, const SeparatorSpec& sep) {
  if (!demos.empty() && sep.separator.empty()) throw Error("separator must be non-empty when k > 0");
  std::string prefix;
  for (const auto& demo : demos) {
    prefix += demo.text;
    prefix += sep.separator;
  }
  std::vector<InstantiatedPrompt> composed;
  composed.reserve(targets.size());
  for (const auto& target : targets) {
    InstantiatedPrompt p = target;
    p.text = prefix + target.text;
    p.mask_span.begin += prefix.size();
    p.mask_span.end += prefix.size();
    composed.push_back(std::move(p));
  }
  return composed;
}

std::size_t max_candidate_tokens(const LanguageModel& model, std::span<const InstantiatedPrompt> demos,
                                 std::span<const InstantiatedPrompt> targets, const SeparatorSpec& sep) {
  std::size_t longest = 0;
  for (const auto& p : build_context(demos, targets, sep)) longest = std::max(longest, model.tokenize(p.text).size());
  return longest;
}

FewShotContext truncate_to_fit(std::span<const InstantiatedPrompt> demos, std::span<const InstantiatedPrompt> targets,
                               const SeparatorSpec& sep, const LanguageModel& model, std::size_t reserve_tokens) {
  const std::size_t n_ctx = model.descriptor().context_length;
  const std::size_t budget = n_ctx > reserve_tokens ? n_ctx - reserve_tokens : 0;
  if (max_candidate_tokens(model, {}, targets, sep) > budget) {
    throw Error("target prompt alone exceeds the context length of " + std::to_string(n_ctx) + " tokens");
  }
  std::size_t drop = 0;
  while (drop < demos.size() && max_candidate_tokens(model, demos.subspan(drop), targets, sep) > budget) ++drop;

  FewShotContext ctx;
  ctx.demos.assign(demos.begin() + static_cast<std::ptrdiff_t>(drop), demos.end());
  ctx.separator = sep.separator;
  ctx.kept_count = ctx.demos.size();
  ctx.dropped_count = drop;
  return ctx;
}

InstantiatedPrompt gold_prompt(const PromptTemplate& tmpl, const Example& example) {
  return instantiate(tmpl, example, example.gold());
}

std::vector<InstantiatedPrompt> candidate_prompts(const PromptTemplate& tmpl, const Example& example, const Task& task) {
  std::vector<InstantiatedPrompt> prompts;
  if (task.kind == TaskKind::generation) {
    InstantiatedPrompt query;
    query.text = render_generation_query(tmpl, example);
    query.mask_span = {query.text.size(), query.text.size()};
    query.template_lang = tmpl.lang;
    query.example_id = example.id;
    prompts.push_back(std::move(query));
    return prompts;
  }
  for (const auto& candidate : example.candidates(task.label_space)) {
    prompts.push_back(instantiate(tmpl, example, candidate));
  }
  return prompts;
}

std::vector<MaxFitRow> max_fit_stats(const Task& task, const TemplateSet& templates, const LanguageModel& model,
                                     const MaxFitOptions& options) {
  const auto& eval = task.split(options.eval_split);
  const std::size_t n_ctx = model.descriptor().context_length;
  const std::size_t budget = n_ctx > options.reserve_tokens ? n_ctx - options.reserve_tokens : 0;
  std::vector<MaxFitRow> rows;
  for (const auto& info : task.languages) {
    MaxFitRow row{task.name, info.code.str(), 0.0, 0};
    std::vector<Example> pool;
    try {
      pool = demo_pool(task, options.eval_split, info.code);
    } catch (const Error&) {
      // No pool: every example fits zero demonstrations.
    }
    const PromptTemplate* tmpl = nullptr;
    double total_fit = 0.0;
    for (const auto& ex : eval) {
      if (ex.lang != info.code) continue;
      if (tmpl == nullptr) tmpl = &select_template(options.template_mode, templates, info.code);
      ++row.n_examples;
      const auto targets = candidate_prompts(*tmpl, ex, task);
      if (max_candidate_tokens(model, {}, targets, options.sep) > budget) continue;

      std::vector<const Example*> order;
      for (const auto& p : pool) {
        if (p.id != ex.id) order.push_back(&p);
      }
      Rng rng(derive_seed(options.seed, ex.id));
      rng.shuffle(std::span<const Example*>(order));

      std::vector<InstantiatedPrompt> demos;
      std::size_t fit = 0;
      for (const auto* demo : order) {
        demos.push_back(gold_prompt(select_template(options.template_mode, templates, demo->lang), *demo));
        if (max_candidate_tokens(model, demos, targets, options.sep) > budget) break;
        fit = demos.size();
      }
      total_fit += static_cast<double>(fit);
    }
    if (row.n_examples > 0) row.mean_fit = total_fit / static_cast<double>(row.n_examples);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string max_fit_csv(std::span<const MaxFitRow> rows) {
  std::string out = "task,lang,mean_fit,n_examples\n";
  for (const auto& row : rows) {
    char mean[64];
    std::snprintf(mean, sizeof mean, "%.4f", row.mean_fit);
    out += row.task + "," + row.lang + "," + mean + "," + std::to_string(row.n_examples) + "\n";
  }
  return out;
}

}  // namespace xshot
