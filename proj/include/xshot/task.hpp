#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace xshot {

enum class ResourceLevel { high, medium, low, extremely_low, unknown };

std::string_view to_string(ResourceLevel level);
ResourceLevel parse_resource_level(std::string_view name);

/// Lowercase ASCII language tag of length 2-3, e.g. "en", "sw", "haw".
class LanguageCode {
 public:
  LanguageCode() = default;
  explicit LanguageCode(std::string code);

  const std::string& str() const { return code_; }
  bool empty() const { return code_.empty(); }

  friend auto operator<=>(const LanguageCode&, const LanguageCode&) = default;

 private:
  std::string code_;
};

struct LanguageInfo {
  LanguageCode code;
  ResourceLevel resource_level = ResourceLevel::unknown;
};

struct ClassLabel {
  std::string label;
};

struct MultipleChoice {
  std::vector<std::string> choices;
  std::size_t answer_index = 0;
};

struct Reference {
  std::string text;
};

using Payload = std::variant<ClassLabel, MultipleChoice, Reference>;

struct Example {
  std::string id;
  LanguageCode lang;
  std::map<std::string, std::string> fields;
  Payload payload;
  std::optional<std::string> selector;

  /// Text of the gold candidate (label name, correct choice or reference).
  std::string gold() const;
  /// Candidates in scoring order; empty for generation examples.
  std::vector<std::string> candidates(const std::vector<std::string>& label_space) const;
};

enum class TaskKind { classification, multiple_choice, generation, cloze_probe };
enum class MetricKind { accuracy, precision_recall, precision_at_1, corpus_bleu };

std::string_view to_string(TaskKind kind);
std::string_view to_string(MetricKind kind);
TaskKind parse_task_kind(std::string_view name);
MetricKind parse_metric_kind(std::string_view name);

struct Task {
  std::string name;
  TaskKind kind = TaskKind::classification;
  MetricKind metric = MetricKind::accuracy;
  std::vector<std::string> label_space;
  std::optional<std::string> positive_label;
  std::vector<LanguageInfo> languages;
  std::map<std::string, std::vector<Example>> splits;
  std::optional<std::string> demo_split_policy;

  const std::vector<Example>& split(const std::string& name) const;
  ResourceLevel resource_level(const LanguageCode& lang) const;
  bool has_language(const LanguageCode& lang) const;
};

/// Loads a task manifest and every split it references.
/// Split paths are resolved relative to the manifest's directory.
Task load_task(const std::filesystem::path& manifest_path);

/// Parses one JSONL record. `where` prefixes error messages.
Example parse_example(std::string_view line, const Task& task, const std::string& where);

/// Canonical single-line JSON for an example (sorted keys, no whitespace).
std::string to_jsonl_record(const Example& example);

/// Demonstration pool for evaluating `eval_split` in `lang`:
/// the manifest policy if set, else train, else dev (for test), else test (for dev).
std::vector<Example> demo_pool(const Task& task, const std::string& eval_split, const LanguageCode& lang);

/// Name of the split demo_pool() draws from.
std::string demo_split_name(const Task& task, const std::string& eval_split);

/// Keeps the ground truth plus n_keep-1 seeded distractors, shuffled.
Example downsample_candidates(const Example& example, std::size_t n_keep, std::uint64_t rng_seed);

}  // namespace xshot
