#include "xshot/template.hpp"

#include <algorithm>
#include <fstream>

#include "xshot/error.hpp"
#include "xshot/text.hpp"

namespace xshot {

using nlohmann::json;

namespace {

void append_literal(Pattern& pattern, std::string_view text) {
  if (!pattern.segments.empty() && pattern.segments.back().kind == PatternSegment::Kind::literal) {
    pattern.segments.back().text.append(text);
  } else {
    pattern.segments.push_back({PatternSegment::Kind::literal, std::string(text)});
  }
}

const std::string& field_text(const Example& example, const std::string& name) {
  const auto it = example.fields.find(name);
  if (it == example.fields.end()) {
    throw Error("example '" + example.id + "' is missing field '" + name + "'");
  }
  return it->second;
}

// Renders the pattern; `fill` is what goes into the slot. Returns the span it occupies.
MaskSpan render(const PromptTemplate& tmpl, const Example& example, std::string_view fill, std::string& out) {
  const Pattern& pattern = tmpl.pattern_for(example);
  MaskSpan span;
  bool placed = false;
  for (const auto& seg : pattern.segments) {
    switch (seg.kind) {
      case PatternSegment::Kind::literal:
        out.append(seg.text);
        break;
      case PatternSegment::Kind::mask:
        span.begin = out.size();
        out.append(fill);
        span.end = out.size();
        placed = true;
        break;
      case PatternSegment::Kind::field: {
        const std::string& value = field_text(example, seg.text);
        if (tmpl.blank_field && seg.text == *tmpl.blank_field && !placed) {
          const auto blank = value.find('_');
          if (blank == std::string::npos || value.find('_', blank + 1) != std::string::npos) {
            throw Error("example '" + example.id + "': field '" + seg.text + "' must contain exactly one '_'");
          }
          out.append(value, 0, blank);
          span.begin = out.size();
          out.append(fill);
          span.end = out.size();
          out.append(value, blank + 1);
          placed = true;
        } else {
          out.append(value);
        }
        break;
      }
    }
  }
  if (!placed) throw Error("template for task '" + tmpl.task + "' produced no mask slot");
  return span;
}

}  // namespace

std::set<std::string> Pattern::fields() const {
  std::set<std::string> names;
  for (const auto& seg : segments) {
    if (seg.kind == PatternSegment::Kind::field) names.insert(seg.text);
  }
  return names;
}

std::size_t Pattern::mask_count() const {
  return static_cast<std::size_t>(std::count_if(segments.begin(), segments.end(), [](const auto& s) {
    return s.kind == PatternSegment::Kind::mask;
  }));
}

Pattern parse_pattern(std::string_view source) {
  if (source.empty()) throw Error("empty pattern");
  Pattern pattern;
  std::size_t i = 0;
  while (i < source.size()) {
    const auto rest = source.substr(i);
    if (rest.starts_with("{{") || rest.starts_with("}}") || rest.starts_with("[[") || rest.starts_with("]]")) {
      append_literal(pattern, rest.substr(0, 1));
      i += 2;
    } else if (rest.starts_with(kMaskToken)) {
      pattern.segments.push_back({PatternSegment::Kind::mask, {}});
      i += kMaskToken.size();
    } else if (rest.front() == '{') {
      const auto close = rest.find('}');
      const auto reopen = rest.find('{', 1);
      if (close == std::string_view::npos || (reopen != std::string_view::npos && reopen < close)) {
        throw Error("unbalanced braces in pattern \"" + std::string(source) + "\"");
      }
      const auto name = rest.substr(1, close - 1);
      if (name.empty()) throw Error("empty placeholder in pattern \"" + std::string(source) + "\"");
      pattern.segments.push_back({PatternSegment::Kind::field, std::string(name)});
      i += close + 1;
    } else if (rest.front() == '}') {
      throw Error("unbalanced braces in pattern \"" + std::string(source) + "\"");
    } else {
      append_literal(pattern, rest.substr(0, 1));
      ++i;
    }
  }
  return pattern;
}

Verbalizer Verbalizer::from_map(std::map<std::string, std::string> mapping) {
  std::set<std::string> images;
  for (const auto& [label, surface] : mapping) {
    if (!images.insert(surface).second) {
      throw Error("verbalizer is not injective: '" + surface + "' is used by more than one label");
    }
  }
  Verbalizer v;
  v.kind_ = Kind::map;
  v.mapping_ = std::move(mapping);
  return v;
}

std::string Verbalizer::apply(const std::string& candidate) const {
  if (kind_ == Kind::identity) return candidate;
  const auto it = mapping_.find(candidate);
  if (it == mapping_.end()) throw Error("candidate '" + candidate + "' is not in the verbalizer domain");
  return it->second;
}

void Verbalizer::check_covers(const std::vector<std::string>& label_space) const {
  if (kind_ == Kind::identity) return;
  for (const auto& label : label_space) {
    if (!mapping_.contains(label)) throw Error("verbalizer does not cover label '" + label + "'");
  }
}

const Pattern& PromptTemplate::pattern_for(const Example& example) const {
  if (example.selector) {
    if (const auto it = patterns.find(*example.selector); it != patterns.end()) return it->second;
  }
  if (const auto it = patterns.find(std::string(kDefaultSelector)); it != patterns.end()) return it->second;
  throw Error("template for task '" + task + "' has no pattern for selector '" +
              example.selector.value_or(std::string(kDefaultSelector)) + "'");
}

std::set<std::string> PromptTemplate::fields() const {
  std::set<std::string> names;
  for (const auto& [_, pattern] : patterns) names.merge(pattern.fields());
  return names;
}

std::string InstantiatedPrompt::with_mask_restored() const {
  std::string out = text.substr(0, mask_span.begin);
  out.append(kMaskToken);
  out.append(text, mask_span.end);
  return out;
}

PromptTemplate parse_template(const json& descriptor) {
  if (!descriptor.is_object()) throw Error("template descriptor must be a JSON object");
  PromptTemplate tmpl;
  tmpl.task = descriptor.at("task").get<std::string>();
  tmpl.lang = LanguageCode(descriptor.at("language").get<std::string>());
  if (const auto it = descriptor.find("blank_field"); it != descriptor.end()) tmpl.blank_field = it->get<std::string>();

  const auto& patterns = descriptor.at("patterns");
  if (!patterns.is_object() || patterns.empty()) throw Error("template descriptor needs a non-empty \"patterns\" object");
  for (const auto& [selector, source] : patterns.items()) {
    Pattern pattern = parse_pattern(text::nfc(source.get<std::string>()));
    const auto masks = pattern.mask_count();
    if (tmpl.blank_field) {
      if (masks != 0) throw Error("pattern \"" + selector + "\": blank-field templates must not contain [Mask]");
      if (!pattern.fields().contains(*tmpl.blank_field)) {
        throw Error("pattern \"" + selector + "\" does not reference blank field '" + *tmpl.blank_field + "'");
      }
    } else if (masks != 1) {
      throw Error("pattern \"" + selector + "\" must contain exactly one [Mask], found " + std::to_string(masks));
    }
    tmpl.patterns.emplace(selector, std::move(pattern));
  }

  const auto& verbalizer = descriptor.at("verbalizer");
  if (verbalizer.is_string()) {
    if (verbalizer.get<std::string>() != "identity") throw Error("unknown verbalizer '" + verbalizer.get<std::string>() + "'");
    tmpl.verbalizer = Verbalizer::identity();
  } else if (verbalizer.is_object()) {
    std::map<std::string, std::string> mapping;
    for (const auto& [label, surface] : verbalizer.items()) mapping.emplace(text::nfc(label), text::nfc(surface.get<std::string>()));
    tmpl.verbalizer = Verbalizer::from_map(std::move(mapping));
  } else {
    throw Error("verbalizer must be \"identity\" or an object");
  }
  return tmpl;
}

PromptTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open template descriptor " + path.string());
  try {
    return parse_template(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

InstantiatedPrompt instantiate(const PromptTemplate& tmpl, const Example& example, const std::string& candidate,
                               const Verbalizer& verbalizer) {
  InstantiatedPrompt prompt;
  prompt.mask_span = render(tmpl, example, verbalizer.apply(candidate), prompt.text);
  prompt.template_lang = tmpl.lang;
  prompt.example_id = example.id;
  return prompt;
}

std::string render_unfilled(const PromptTemplate& tmpl, const Example& example) {
  std::string out;
  render(tmpl, example, kMaskToken, out);
  return out;
}

std::string render_generation_query(const PromptTemplate& tmpl, const Example& example) {
  const Pattern& pattern = tmpl.pattern_for(example);
  const auto& segs = pattern.segments;
  const auto mask = std::find_if(segs.begin(), segs.end(), [](const auto& s) { return s.kind == PatternSegment::Kind::mask; });
  const bool terminal = mask != segs.end() && std::all_of(mask + 1, segs.end(), [](const auto& s) {
    return s.kind == PatternSegment::Kind::literal &&
           std::all_of(s.text.begin(), s.text.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
  });
  if (!terminal) throw Error("generation requires terminal mask");
  std::string out;
  const auto span = render(tmpl, example, {}, out);
  out.resize(span.begin);
  return out;
}

void TemplateSet::add(PromptTemplate tmpl) {
  const auto lang = tmpl.lang;
  if (!by_lang_.emplace(lang, std::move(tmpl)).second) {
    throw Error("duplicate template for language '" + lang.str() + "'");
  }
}

const PromptTemplate* TemplateSet::find(const LanguageCode& lang) const {
  const auto it = by_lang_.find(lang);
  return it == by_lang_.end() ? nullptr : &it->second;
}

TemplateSet TemplateSet::load_directory(const std::filesystem::path& dir, const std::string& task_name) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_regular_file(dir)) {
    files.push_back(dir);
  } else {
    if (!std::filesystem::is_directory(dir)) throw Error("template directory " + dir.string() + " does not exist");
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  }
  TemplateSet set;
  for (const auto& file : files) {
    auto tmpl = load_template(file);
    if (task_name.empty() || tmpl.task == task_name) set.add(std::move(tmpl));
  }
  if (set.empty()) throw Error("no templates for task '" + task_name + "' in " + dir.string());
  return set;
}

const PromptTemplate& select_template(const TemplateMode& mode, const TemplateSet& templates,
                                      const LanguageCode& example_lang) {
  const LanguageCode& wanted =
      mode.mode() == TemplateMode::Mode::source_language ? *mode.source_lang() : example_lang;
  const auto* tmpl = templates.find(wanted);
  if (tmpl == nullptr) throw Error("no template for language '" + wanted.str() + "'");
  return *tmpl;
}

void check_binding(const PromptTemplate& tmpl, const Task& task) {
  if (task.kind == TaskKind::classification) tmpl.verbalizer.check_covers(task.label_space);
  const auto needed = tmpl.fields();
  for (const auto& [split, examples] : task.splits) {
    for (const auto& ex : examples) {
      for (const auto& name : needed) {
        if (!ex.fields.contains(name)) {
          throw Error("template field '" + name + "' missing from example '" + ex.id + "' in split '" + split + "'");
        }
      }
    }
  }
}

}  // namespace xshot
