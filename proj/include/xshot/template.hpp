#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "xshot/task.hpp"

namespace xshot {

inline constexpr std::string_view kMaskToken = "[Mask]";
inline constexpr std::string_view kDefaultSelector = "*";

struct PatternSegment {
  enum class Kind { literal, field, mask };
  Kind kind = Kind::literal;
  std::string text;  // literal text or field name; empty for the mask

  friend bool operator==(const PatternSegment&, const PatternSegment&) = default;
};

/// A parsed cloze pattern: literals, "{field}" placeholders and at most one mask.
struct Pattern {
  std::vector<PatternSegment> segments;

  std::set<std::string> fields() const;
  std::size_t mask_count() const;
};

/// Parses "{field}", "[Mask]" and the escapes "{{" "}}" "[[" "]]".
Pattern parse_pattern(std::string_view source);

class Verbalizer {
 public:
  enum class Kind { identity, map };

  static Verbalizer identity() { return Verbalizer(); }
  /// Throws unless the mapping is injective.
  static Verbalizer from_map(std::map<std::string, std::string> mapping);

  Kind kind() const { return kind_; }
  const std::map<std::string, std::string>& mapping() const { return mapping_; }

  /// v(candidate). Throws if a map verbalizer does not cover the candidate.
  std::string apply(const std::string& candidate) const;
  /// Throws unless a map verbalizer covers every label.
  void check_covers(const std::vector<std::string>& label_space) const;

 private:
  Kind kind_ = Kind::identity;
  std::map<std::string, std::string> mapping_;
};

struct PromptTemplate {
  std::string task;
  LanguageCode lang;
  std::map<std::string, Pattern> patterns;
  Verbalizer verbalizer;
  /// When set, patterns carry no "[Mask]"; the single "_" in this field marks the slot.
  std::optional<std::string> blank_field;

  const Pattern& pattern_for(const Example& example) const;
  std::set<std::string> fields() const;
};

/// Character offsets [begin, end) of the substituted candidate.
struct MaskSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  friend bool operator==(const MaskSpan&, const MaskSpan&) = default;
};

struct InstantiatedPrompt {
  std::string text;
  MaskSpan mask_span;
  LanguageCode template_lang;
  std::string example_id;

  std::string_view masked_text() const { return std::string_view(text).substr(mask_span.begin, mask_span.size()); }
  std::string_view before_mask() const { return std::string_view(text).substr(0, mask_span.begin); }
  /// The prompt with the candidate replaced by the literal mask token.
  std::string with_mask_restored() const;
};

class TemplateMode {
 public:
  enum class Mode { same_language, source_language };

  static TemplateMode same_language() { return TemplateMode(Mode::same_language, {}); }
  static TemplateMode source_language(LanguageCode source) { return TemplateMode(Mode::source_language, std::move(source)); }

  Mode mode() const { return mode_; }
  const std::optional<LanguageCode>& source_lang() const { return source_lang_; }

 private:
  TemplateMode(Mode mode, std::optional<LanguageCode> source) : mode_(mode), source_lang_(std::move(source)) {}

  Mode mode_;
  std::optional<LanguageCode> source_lang_;
};

/// Parses a template descriptor:
/// {"task","language","patterns":{selector:pattern},"verbalizer":"identity"|{label:string},"blank_field"?}
PromptTemplate parse_template(const nlohmann::json& descriptor);
PromptTemplate load_template(const std::filesystem::path& path);

/// P(x, y): the template applied to `example` with v(candidate) at the mask.
InstantiatedPrompt instantiate(const PromptTemplate& tmpl, const Example& example, const std::string& candidate,
                               const Verbalizer& verbalizer);
inline InstantiatedPrompt instantiate(const PromptTemplate& tmpl, const Example& example, const std::string& candidate) {
  return instantiate(tmpl, example, candidate, tmpl.verbalizer);
}

/// T(x) with the literal mask token left in place.
std::string render_unfilled(const PromptTemplate& tmpl, const Example& example);

/// Prompt prefix for free-form decoding; the mask must end the pattern.
std::string render_generation_query(const PromptTemplate& tmpl, const Example& example);

/// Templates for one task, indexed by language.
class TemplateSet {
 public:
  void add(PromptTemplate tmpl);
  const PromptTemplate* find(const LanguageCode& lang) const;
  bool empty() const { return by_lang_.empty(); }
  const std::map<LanguageCode, PromptTemplate>& all() const { return by_lang_; }

  /// Every *.json descriptor under `dir` whose "task" equals `task_name`
  /// (or every descriptor when `task_name` is empty).
  static TemplateSet load_directory(const std::filesystem::path& dir, const std::string& task_name = {});

 private:
  std::map<LanguageCode, PromptTemplate> by_lang_;
};

const PromptTemplate& select_template(const TemplateMode& mode, const TemplateSet& templates,
                                      const LanguageCode& example_lang);

/// Bind-time check: every field the template names exists in `example`,
/// and a map verbalizer covers the task's label space.
void check_binding(const PromptTemplate& tmpl, const Task& task);

}  // namespace xshot
