#include "xshot/config.hpp"

#include <fstream>
#include <set>

#include "xshot/cache.hpp"
#include "xshot/error.hpp"
#include "xshot/ngram.hpp"
#include "xshot/remote.hpp"

namespace xshot {

using nlohmann::json;

void EvalConfig::validate() const {
  if (shots.empty()) throw Error("config: shot list must be non-empty");
  if (n_runs < 1) throw Error("config: runs must be at least 1");
  if (threads < 1) throw Error("config: threads must be at least 1");
  if (generation.max_new_tokens < 1) throw Error("config: max_new_tokens must be at least 1");
  if (probe_candidates && *probe_candidates < 2) throw Error("config: probe_candidates must be at least 2");
  calibration.validate();
  for (const auto k : shots) {
    if (k > 0 && sep.separator.empty()) throw Error("config: separator must be non-empty when k > 0");
  }
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string resolve_backend(const std::filesystem::path& base, const std::string& spec) {
  for (const std::string prefix : {"ngram:", "context-cache:"}) {
    if (spec.starts_with(prefix)) return prefix + resolve(base, spec.substr(prefix.size())).string();
  }
  return spec;
}

}  // namespace

EvalConfig parse_eval_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw Error("config must be a JSON object");
  static const std::set<std::string> kKeys = {
      "task", "templates", "backend", "context_length", "cache_lambda", "remote_max_in_flight", "eval_split",
      "languages", "scoring", "answer_context", "calibrate", "content_free_inputs", "shots", "runs", "seed",
      "strategy", "separator", "resample_per_example", "template_mode", "template_lang", "demo_lang",
      "translate_test", "translate_target", "probe_candidates", "max_new_tokens", "stop", "cache_dir", "out",
      "record_prompts", "threads"};
  for (const auto& [key, _] : doc.items()) {
    if (!kKeys.contains(key)) throw Error("config: unknown key \"" + key + "\"");
  }

  EvalConfig c;
  try {
    if (doc.contains("task")) c.task = resolve(base_dir, doc["task"].get<std::string>());
    if (doc.contains("templates")) c.templates = resolve(base_dir, doc["templates"].get<std::string>());
    if (doc.contains("backend")) c.backend = resolve_backend(base_dir, doc["backend"].get<std::string>());
    c.context_length = doc.value("context_length", c.context_length);
    c.cache_lambda = doc.value("cache_lambda", c.cache_lambda);
    c.remote_max_in_flight = doc.value("remote_max_in_flight", c.remote_max_in_flight);
    c.eval_split = doc.value("eval_split", c.eval_split);
    c.languages = doc.value("languages", c.languages);

    const auto kind = parse_scoring_kind(doc.value("scoring", std::string("mean-skip-common-prefix")));
    c.scoring = kind == ScoringKind::uncond_normalized
                    ? ScoringFunction::uncond_normalized(doc.value("answer_context", std::string(kDefaultAnswerContext)))
                    : ScoringFunction(kind);
    c.calibration.enabled = doc.value("calibrate", false);
    if (doc.contains("content_free_inputs")) c.calibration.content_free_inputs = doc["content_free_inputs"].get<std::vector<std::string>>();

    c.shots = doc.value("shots", c.shots);
    c.n_runs = doc.value("runs", c.n_runs);
    c.base_seed = doc.value("seed", c.base_seed);
    if (doc.contains("strategy")) c.strategy = parse_sampling_strategy(doc["strategy"].get<std::string>());
    c.sep.separator = doc.value("separator", c.sep.separator);
    c.resample_per_example = doc.value("resample_per_example", false);

    const std::string mode = doc.value("template_mode", std::string("same"));
    if (mode == "source") {
      c.template_mode = TemplateMode::source_language(LanguageCode(doc.value("template_lang", std::string("en"))));
    } else if (mode != "same") {
      throw Error("config: template_mode must be \"same\" or \"source\"");
    }
    if (doc.contains("demo_lang") && !doc["demo_lang"].is_null()) c.demo_lang = LanguageCode(doc["demo_lang"].get<std::string>());
    if (doc.contains("translate_test") && !doc["translate_test"].is_null()) c.translate_test = doc["translate_test"].get<std::string>();
    if (doc.contains("translate_target")) c.translate_target = LanguageCode(doc["translate_target"].get<std::string>());
    if (doc.contains("probe_candidates") && !doc["probe_candidates"].is_null()) c.probe_candidates = doc["probe_candidates"].get<std::size_t>();
    c.generation.max_new_tokens = doc.value("max_new_tokens", c.generation.max_new_tokens);
    c.generation.stop_sequences = doc.value("stop", c.generation.stop_sequences);
    if (doc.contains("cache_dir") && !doc["cache_dir"].is_null()) c.cache_dir = resolve(base_dir, doc["cache_dir"].get<std::string>());
    if (doc.contains("out")) c.out_dir = resolve(base_dir, doc["out"].get<std::string>());
    c.record_prompts = doc.value("record_prompts", false);
    c.threads = doc.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

EvalConfig load_eval_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return parse_eval_config(doc, path.parent_path());
}

json to_json(const EvalConfig& c) {
  json doc{
      {"task", c.task.string()},
      {"templates", c.templates.string()},
      {"backend", c.backend},
      {"context_length", c.context_length},
      {"cache_lambda", c.cache_lambda},
      {"eval_split", c.eval_split},
      {"languages", c.languages},
      {"scoring", to_string(c.scoring.kind())},
      {"calibrate", c.calibration.enabled},
      {"content_free_inputs", c.calibration.content_free_inputs},
      {"shots", c.shots},
      {"runs", c.n_runs},
      {"seed", c.base_seed},
      {"strategy", to_string(c.strategy)},
      {"separator", c.sep.separator},
      {"resample_per_example", c.resample_per_example},
      {"template_mode", c.template_mode.mode() == TemplateMode::Mode::source_language ? "source" : "same"},
      {"translate_target", c.translate_target.str()},
      {"max_new_tokens", c.generation.max_new_tokens},
      {"stop", c.generation.stop_sequences},
      {"out", c.out_dir.string()},
      {"record_prompts", c.record_prompts},
      {"threads", c.threads},
  };
  if (c.scoring.kind() == ScoringKind::uncond_normalized) doc["answer_context"] = c.scoring.answer_context();
  if (c.template_mode.source_lang()) doc["template_lang"] = c.template_mode.source_lang()->str();
  if (c.demo_lang) doc["demo_lang"] = c.demo_lang->str();
  if (c.translate_test) doc["translate_test"] = *c.translate_test;
  if (c.probe_candidates) doc["probe_candidates"] = *c.probe_candidates;
  if (c.cache_dir) doc["cache_dir"] = c.cache_dir->string();
  return doc;
}

std::shared_ptr<const LanguageModel> make_backend(const std::string& spec, std::size_t context_length,
                                                  double cache_lambda, int max_in_flight) {
  if (spec == "uniform") return std::make_shared<UniformBackend>(context_length);
  if (spec.starts_with("ngram:")) {
    auto model = std::make_shared<const NgramModel>(NgramModel::load(spec.substr(6)));
    return std::make_shared<NgramBackend>(std::move(model), context_length);
  }
  if (spec.starts_with("context-cache:")) {
    auto model = std::make_shared<const NgramModel>(NgramModel::load(spec.substr(14)));
    return std::make_shared<ContextCacheBackend>(std::move(model), cache_lambda, context_length);
  }
  if (spec.starts_with("remote:")) return std::make_shared<RemoteBackend>(spec.substr(7), max_in_flight);
  throw Error("unknown backend '" + spec + "' (uniform | ngram:PATH | context-cache:PATH | remote:URL)");
}

std::shared_ptr<const LanguageModel> make_backend(const EvalConfig& config) {
  auto backend = make_backend(config.backend, config.context_length, config.cache_lambda, config.remote_max_in_flight);
  if (const auto dir = resolve_cache_dir(config.cache_dir)) {
    return std::make_shared<CachedBackend>(std::move(backend), *dir);
  }
  return backend;
}

}  // namespace xshot
