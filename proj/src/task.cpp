#include "xshot/task.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "xshot/digest.hpp"
#include "xshot/error.hpp"
#include "xshot/random.hpp"
#include "xshot/text.hpp"

namespace xshot {

using nlohmann::json;

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view name, const std::pair<Enum, std::string_view> (&table)[N],
                std::string_view what) {
  for (const auto& [value, text] : table) {
    if (text == name) return value;
  }
  throw Error("unknown " + std::string(what) + " '" + std::string(name) + "'");
}

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum value, const std::pair<Enum, std::string_view> (&table)[N]) {
  for (const auto& [v, text] : table) {
    if (v == value) return text;
  }
  return "?";
}

constexpr std::pair<ResourceLevel, std::string_view> kLevels[] = {
    {ResourceLevel::high, "high"},
    {ResourceLevel::medium, "medium"},
    {ResourceLevel::low, "low"},
    {ResourceLevel::extremely_low, "extremely-low"},
    {ResourceLevel::unknown, "unknown"},
};

constexpr std::pair<TaskKind, std::string_view> kKinds[] = {
    {TaskKind::classification, "classification"},
    {TaskKind::multiple_choice, "multiple-choice"},
    {TaskKind::generation, "generation"},
    {TaskKind::cloze_probe, "cloze-probe"},
};

constexpr std::pair<MetricKind, std::string_view> kMetrics[] = {
    {MetricKind::accuracy, "accuracy"},
    {MetricKind::precision_recall, "precision-recall"},
    {MetricKind::precision_at_1, "precision-at-1"},
    {MetricKind::corpus_bleu, "corpus-bleu"},
};

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw Error(where + ": missing \"" + key + "\"");
  if (!it->is_string()) throw Error(where + ": \"" + key + "\" must be a string");
  return it->get<std::string>();
}

std::string normalized(const json& value, const std::string& where, const std::string& what) {
  if (!value.is_string()) throw Error(where + ": " + what + " must be a string");
  return text::nfc(value.get<std::string>());
}

}  // namespace

std::string_view to_string(ResourceLevel level) { return enum_name(level, kLevels); }
ResourceLevel parse_resource_level(std::string_view name) { return parse_enum(name, kLevels, "resource level"); }
std::string_view to_string(TaskKind kind) { return enum_name(kind, kKinds); }
std::string_view to_string(MetricKind kind) { return enum_name(kind, kMetrics); }
TaskKind parse_task_kind(std::string_view name) { return parse_enum(name, kKinds, "task kind"); }
MetricKind parse_metric_kind(std::string_view name) { return parse_enum(name, kMetrics, "metric"); }

LanguageCode::LanguageCode(std::string code) : code_(std::move(code)) {
  const bool ok = (code_.size() == 2 || code_.size() == 3) &&
                  std::all_of(code_.begin(), code_.end(), [](char c) { return c >= 'a' && c <= 'z'; });
  if (!ok) throw Error("invalid language code '" + code_ + "'");
}

std::string Example::gold() const {
  return std::visit(
      [](const auto& p) -> std::string {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ClassLabel>) {
          return p.label;
        } else if constexpr (std::is_same_v<T, MultipleChoice>) {
          return p.choices.at(p.answer_index);
        } else {
          return p.text;
        }
      },
      payload);
}

std::vector<std::string> Example::candidates(const std::vector<std::string>& label_space) const {
  if (std::holds_alternative<ClassLabel>(payload)) return label_space;
  if (const auto* mc = std::get_if<MultipleChoice>(&payload)) return mc->choices;
  return {};
}

const std::vector<Example>& Task::split(const std::string& name) const {
  const auto it = splits.find(name);
  if (it == splits.end()) throw Error("task '" + this->name + "' has no split '" + name + "'");
  return it->second;
}

ResourceLevel Task::resource_level(const LanguageCode& lang) const {
  for (const auto& info : languages) {
    if (info.code == lang) return info.resource_level;
  }
  return ResourceLevel::unknown;
}

bool Task::has_language(const LanguageCode& lang) const {
  return std::any_of(languages.begin(), languages.end(), [&](const auto& info) { return info.code == lang; });
}

Example parse_example(std::string_view line, const Task& task, const std::string& where) {
  json record;
  try {
    record = json::parse(line);
  } catch (const json::parse_error& e) {
    throw Error(where + ": malformed record: " + e.what());
  }
  if (!record.is_object()) throw Error(where + ": malformed record: not a JSON object");

  static const std::set<std::string> kKnownKeys = {"id", "lang", "fields", "label", "choices",
                                                   "answer", "reference", "selector"};
  for (const auto& [key, _] : record.items()) {
    if (!kKnownKeys.contains(key)) throw Error(where + ": malformed record: unknown key \"" + key + "\"");
  }

  Example ex;
  ex.id = text::nfc(require_string(record, "id", where));
  if (ex.id.empty()) throw Error(where + ": malformed record: empty id");
  try {
    ex.lang = LanguageCode(require_string(record, "lang", where));
  } catch (const Error& e) {
    throw Error(where + ": " + e.what());
  }
  if (!task.has_language(ex.lang)) {
    throw Error(where + ": language '" + ex.lang.str() + "' not listed in task manifest");
  }

  const auto fields = record.find("fields");
  if (fields == record.end() || !fields->is_object()) throw Error(where + ": malformed record: \"fields\" must be an object");
  for (const auto& [name, value] : fields->items()) {
    ex.fields.emplace(name, normalized(value, where, "field \"" + name + "\""));
  }
  if (const auto sel = record.find("selector"); sel != record.end()) {
    ex.selector = normalized(*sel, where, "\"selector\"");
  }

  const bool has_label = record.contains("label");
  const bool has_choices = record.contains("choices") || record.contains("answer");
  const bool has_reference = record.contains("reference");
  switch (task.kind) {
    case TaskKind::classification: {
      if (!has_label || has_choices || has_reference) throw Error(where + ": malformed record: classification needs exactly \"label\"");
      ClassLabel label{normalized(record["label"], where, "\"label\"")};
      if (std::find(task.label_space.begin(), task.label_space.end(), label.label) == task.label_space.end()) {
        throw Error(where + ": label '" + label.label + "' not in label space");
      }
      ex.payload = std::move(label);
      break;
    }
    case TaskKind::multiple_choice:
    case TaskKind::cloze_probe: {
      if (has_label || has_reference || !record.contains("choices") || !record.contains("answer")) {
        throw Error(where + ": malformed record: expected \"choices\" and \"answer\"");
      }
      const auto& choices = record["choices"];
      if (!choices.is_array() || choices.size() < 2) throw Error(where + ": malformed record: \"choices\" must list at least 2 strings");
      MultipleChoice mc;
      for (const auto& c : choices) mc.choices.push_back(normalized(c, where, "choice"));
      const auto& answer = record["answer"];
      if (!answer.is_number_integer()) throw Error(where + ": malformed record: \"answer\" must be an integer");
      const auto index = answer.get<std::int64_t>();
      if (index < 0 || static_cast<std::size_t>(index) >= mc.choices.size()) {
        throw Error(where + ": answer index out of range");
      }
      mc.answer_index = static_cast<std::size_t>(index);
      ex.payload = std::move(mc);
      break;
    }
    case TaskKind::generation: {
      if (!has_reference || has_label || has_choices) throw Error(where + ": malformed record: generation needs exactly \"reference\"");
      ex.payload = Reference{normalized(record["reference"], where, "\"reference\"")};
      break;
    }
  }
  return ex;
}

std::string to_jsonl_record(const Example& example) {
  json record;
  record["id"] = example.id;
  record["lang"] = example.lang.str();
  record["fields"] = json::object();
  for (const auto& [name, value] : example.fields) record["fields"][name] = value;
  if (example.selector) record["selector"] = *example.selector;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ClassLabel>) {
          record["label"] = p.label;
        } else if constexpr (std::is_same_v<T, MultipleChoice>) {
          record["choices"] = p.choices;
          record["answer"] = p.answer_index;
        } else {
          record["reference"] = p.text;
        }
      },
      example.payload);
  return canonical_json(record);
}

Task load_task(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error("cannot open task manifest " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(manifest_path.string() + ": malformed manifest: " + e.what());
  }
  const std::string where = manifest_path.string();

  Task task;
  task.name = require_string(manifest, "name", where);
  task.kind = parse_task_kind(require_string(manifest, "kind", where));
  task.metric = parse_metric_kind(require_string(manifest, "metric", where));
  if (const auto it = manifest.find("label_space"); it != manifest.end()) {
    for (const auto& label : *it) task.label_space.push_back(normalized(label, where, "label"));
  }
  if ((task.kind == TaskKind::classification) != !task.label_space.empty()) {
    throw Error(where + ": label_space must be non-empty exactly for classification tasks");
  }
  if (std::set<std::string>(task.label_space.begin(), task.label_space.end()).size() != task.label_space.size()) {
    throw Error(where + ": duplicate label in label_space");
  }
  if (const auto it = manifest.find("positive_label"); it != manifest.end()) {
    task.positive_label = normalized(*it, where, "positive_label");
  }
  if (task.metric == MetricKind::precision_recall) {
    if (task.label_space.size() != 2) throw Error(where + ": precision-recall requires a binary label space");
    if (!task.positive_label ||
        std::find(task.label_space.begin(), task.label_space.end(), *task.positive_label) == task.label_space.end()) {
      throw Error(where + ": precision-recall requires positive_label from label_space");
    }
  }
  if (const auto it = manifest.find("demo_split_policy"); it != manifest.end()) {
    task.demo_split_policy = it->get<std::string>();
  }

  const auto langs = manifest.find("languages");
  if (langs == manifest.end() || !langs->is_array() || langs->empty()) throw Error(where + ": \"languages\" must be a non-empty array");
  for (const auto& entry : *langs) {
    LanguageInfo info;
    if (entry.is_string()) {
      info.code = LanguageCode(entry.get<std::string>());
    } else {
      info.code = LanguageCode(require_string(entry, "code", where));
      if (entry.contains("resource_level")) info.resource_level = parse_resource_level(entry["resource_level"].get<std::string>());
    }
    if (task.has_language(info.code)) throw Error(where + ": duplicate language '" + info.code.str() + "'");
    task.languages.push_back(info);
  }

  const auto splits = manifest.find("splits");
  if (splits == manifest.end() || !splits->is_object() || splits->empty()) throw Error(where + ": \"splits\" must be a non-empty object");
  const auto base = manifest_path.parent_path();
  for (const auto& [split_name, rel] : splits->items()) {
    const auto path = base / rel.get<std::string>();
    std::ifstream data(path);
    if (!data) throw Error("missing split file " + path.string());
    std::vector<Example> examples;
    std::set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(data, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto ex = parse_example(line, task, path.string() + ":" + std::to_string(line_no));
      if (!ids.insert(ex.id).second) throw Error(path.string() + ":" + std::to_string(line_no) + ": duplicate id '" + ex.id + "'");
      examples.push_back(std::move(ex));
    }
    task.splits.emplace(split_name, std::move(examples));
  }
  if (task.demo_split_policy && !task.splits.contains(*task.demo_split_policy)) {
    throw Error(where + ": demo_split_policy names unknown split '" + *task.demo_split_policy + "'");
  }
  return task;
}

std::string demo_split_name(const Task& task, const std::string& eval_split) {
  if (task.demo_split_policy) return *task.demo_split_policy;
  if (task.splits.contains("train")) return "train";
  if (eval_split == "test" && task.splits.contains("dev")) return "dev";
  if (eval_split == "dev" && task.splits.contains("test")) return "test";
  throw Error("task '" + task.name + "': no admissible demonstration split for evaluating '" + eval_split + "'");
}

std::vector<Example> demo_pool(const Task& task, const std::string& eval_split, const LanguageCode& lang) {
  task.split(eval_split);
  const auto& source = task.split(demo_split_name(task, eval_split));
  std::vector<Example> pool;
  std::copy_if(source.begin(), source.end(), std::back_inserter(pool), [&](const Example& ex) { return ex.lang == lang; });
  if (pool.empty()) {
    throw Error("task '" + task.name + "': empty demonstration pool for language '" + lang.str() + "'");
  }
  return pool;
}

Example downsample_candidates(const Example& example, std::size_t n_keep, std::uint64_t rng_seed) {
  if (n_keep < 2) throw Error("downsample_candidates: n_keep must be at least 2");
  const auto* mc = std::get_if<MultipleChoice>(&example.payload);
  if (mc == nullptr) throw Error("downsample_candidates: example '" + example.id + "' has no candidate list");
  if (mc->choices.size() < n_keep) {
    throw Error("downsample_candidates: example '" + example.id + "' has fewer than " + std::to_string(n_keep) + " candidates");
  }
  Rng rng(rng_seed);
  std::vector<std::size_t> distractors;
  for (std::size_t i = 0; i < mc->choices.size(); ++i) {
    if (i != mc->answer_index) distractors.push_back(i);
  }
  std::vector<std::size_t> kept{mc->answer_index};
  for (const auto pick : rng.sample_indices(distractors.size(), n_keep - 1)) kept.push_back(distractors[pick]);
  rng.shuffle(std::span<std::size_t>(kept));

  Example out = example;
  MultipleChoice reduced;
  for (const auto index : kept) {
    if (index == mc->answer_index) reduced.answer_index = reduced.choices.size();
    reduced.choices.push_back(mc->choices[index]);
  }
  out.payload = std::move(reduced);
  return out;
}

}  // namespace xshot
