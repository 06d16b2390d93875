#include "xshot/runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <tuple>

#include "xshot/cache.hpp"
#include "xshot/digest.hpp"
#include "xshot/random.hpp"
#include "xshot/error.hpp"
#include "xshot/report.hpp"

namespace xshot {

using nlohmann::json;

namespace {

std::string dump_line(const json& doc) {
  // Byte-level generations may end mid-character; replace rather than fail.
  return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << content;
    if (!out) throw Error("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

auto sort_key(const ResultRecord& r) { return std::tie(r.lang, r.k, r.run, r.example_id); }

/// Copy of `example` with every field replaced by a content-free string.
Example content_free(const Example& example, const std::string& filler, const PromptTemplate& tmpl) {
  Example out = example;
  for (auto& [name, value] : out.fields) {
    value = (tmpl.blank_field && name == *tmpl.blank_field) ? (filler.empty() ? "_" : filler + " _") : filler;
  }
  return out;
}

struct Cell {
  const Task& task;
  const EvalConfig& config;
  const TemplateSet& templates;
  const LanguageModel& model;
  LanguageCode lang;
  std::size_t k;
  std::size_t run;
  std::uint64_t seed;
};

ResultRecord base_record(const Cell& cell) {
  ResultRecord r;
  r.task = cell.task.name;
  r.lang = cell.lang.str();
  r.resource_level = cell.task.resource_level(cell.lang);
  r.metric = std::string(to_string(cell.task.metric));
  r.positive_label = cell.task.positive_label.value_or("");
  r.k = cell.k;
  r.run = cell.run;
  r.run_seed = cell.seed;
  return r;
}

ResultRecord evaluate_example(const Cell& cell, const Example& ex, const std::vector<Example>& pool,
                              const std::vector<Example>& shared_demos) {
  const auto& cfg = cell.config;
  const Task& task = cell.task;
  const ShotSpec shot{cell.k, cfg.strategy, cell.seed};

  std::vector<Example> per_example;
  const std::vector<Example>* demos = &shared_demos;
  const bool collides = std::any_of(shared_demos.begin(), shared_demos.end(), [&](const auto& d) { return d.id == ex.id; });
  if (cell.k > 0 && (cfg.resample_per_example || collides)) {
    ShotSpec redraw = shot;
    redraw.seed = derive_seed(cell.seed, ex.id);
    per_example = sample_demos(pool, redraw, ex.id, task.label_space);
    demos = &per_example;
  }

  std::vector<InstantiatedPrompt> demo_prompts;
  for (const auto& d : *demos) demo_prompts.push_back(gold_prompt(select_template(cfg.template_mode, cell.templates, d.lang), d));

  const PromptTemplate& tmpl = select_template(cfg.template_mode, cell.templates, ex.lang);
  const auto targets = candidate_prompts(tmpl, ex, task);
  const bool generation = task.kind == TaskKind::generation;
  const std::size_t reserve = generation ? cfg.generation.max_new_tokens : 0;
  const FewShotContext context = truncate_to_fit(demo_prompts, targets, cfg.sep, cell.model, reserve);
  const auto composed = build_context(context.demos, targets, cfg.sep);
  const std::size_t budget = cell.model.descriptor().context_length - reserve;
  for (const auto& p : composed) {
    if (cell.model.tokenize(p.text).size() > budget) throw Error("composed prompt exceeds the context length");
  }

  ResultRecord r = base_record(cell);
  r.example_id = ex.id;
  r.gold = ex.gold();
  r.kept_demos = context.kept_count;
  r.dropped_demos = context.dropped_count;
  if (const auto it = ex.fields.find("relation"); it != ex.fields.end()) r.relation = it->second;
  std::vector<std::string> texts;
  for (const auto& p : composed) texts.push_back(p.text);
  r.prompt_digest = prompt_digest(texts);
  if (cfg.record_prompts) r.prompts = texts;

  if (generation) {
    r.prediction = cell.model.greedy_generate(composed.front().text, cfg.generation);
    r.correct = r.prediction == r.gold;
    return r;
  }

  const auto candidates = ex.candidates(task.label_space);
  const auto scores = score_candidates(cell.model, composed, cfg.scoring);
  std::vector<double> values;
  if (cfg.calibration.enabled) {
    std::vector<std::vector<double>> cf_probs;
    for (const auto& filler : cfg.calibration.content_free_inputs) {
      const auto cf_targets = candidate_prompts(tmpl, content_free(ex, filler, tmpl), task);
      const auto cf_composed = build_context(context.demos, cf_targets, cfg.sep);
      cf_probs.push_back(candidate_probabilities(score_candidates(cell.model, cf_composed, cfg.scoring)));
    }
    values = calibrate(candidate_probabilities(scores), cfg.calibration, average_probabilities(cf_probs));
  } else {
    for (const auto& s : scores) values.push_back(s.value);
  }
  const auto chosen = select(values);
  r.scores = values;
  r.prediction = candidates.at(chosen);
  r.correct = r.prediction == r.gold;
  return r;
}

std::vector<ResultRecord> evaluate_cell(const Cell& cell, const std::vector<Example>& examples,
                                        const std::vector<Example>& pool) {
  const std::vector<Example> shared =
      cell.k == 0 ? std::vector<Example>{}
                  : sample_demos(pool, {cell.k, cell.config.strategy, cell.seed}, {}, cell.task.label_space);

  std::vector<ResultRecord> out(examples.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_lock;
  auto worker = [&] {
    for (std::size_t i = next++; i < examples.size(); i = next++) {
      try {
        out[i] = evaluate_example(cell, examples[i], pool, shared);
      } catch (...) {
        std::lock_guard lock(failure_lock);
        if (!failure) failure = std::current_exception();
        next = examples.size();
      }
    }
  };
  const std::size_t n_threads = std::min(cell.config.threads, std::max<std::size_t>(1, examples.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool_threads;
    for (std::size_t t = 0; t < n_threads; ++t) pool_threads.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace

json to_json(const ResultRecord& r) {
  json doc{{"task", r.task},
           {"lang", r.lang},
           {"resource_level", to_string(r.resource_level)},
           {"metric", r.metric},
           {"k", r.k},
           {"run", r.run},
           {"run_seed", r.run_seed},
           {"example_id", r.example_id},
           {"status", r.status}};
  if (!r.positive_label.empty()) doc["positive_label"] = r.positive_label;
  if (r.failed()) {
    doc["error"] = r.error;
    return doc;
  }
  doc["gold"] = r.gold;
  doc["prediction"] = r.prediction;
  doc["correct"] = r.correct;
  doc["scores"] = r.scores;
  doc["prompt_digest"] = r.prompt_digest;
  doc["kept_demos"] = r.kept_demos;
  doc["dropped_demos"] = r.dropped_demos;
  if (!r.relation.empty()) doc["relation"] = r.relation;
  if (!r.prompts.empty()) doc["prompts"] = r.prompts;
  return doc;
}

ResultRecord record_from_json(const json& doc) {
  ResultRecord r;
  r.task = doc.at("task").get<std::string>();
  r.lang = doc.at("lang").get<std::string>();
  r.resource_level = parse_resource_level(doc.value("resource_level", std::string("unknown")));
  r.metric = doc.at("metric").get<std::string>();
  r.positive_label = doc.value("positive_label", std::string());
  r.k = doc.at("k").get<std::size_t>();
  r.run = doc.at("run").get<std::size_t>();
  r.run_seed = doc.at("run_seed").get<std::uint64_t>();
  r.example_id = doc.at("example_id").get<std::string>();
  r.status = doc.at("status").get<std::string>();
  if (r.failed()) {
    r.error = doc.value("error", std::string());
    return r;
  }
  r.gold = doc.at("gold").get<std::string>();
  r.prediction = doc.at("prediction").get<std::string>();
  r.correct = doc.at("correct").get<bool>();
  r.scores = doc.at("scores").get<std::vector<double>>();
  r.prompt_digest = doc.at("prompt_digest").get<std::string>();
  r.kept_demos = doc.value("kept_demos", std::size_t{0});
  r.dropped_demos = doc.value("dropped_demos", std::size_t{0});
  r.relation = doc.value("relation", std::string());
  r.prompts = doc.value("prompts", std::vector<std::string>{});
  return r;
}

std::string to_jsonl(std::vector<ResultRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return sort_key(a) < sort_key(b); });
  std::string out;
  for (const auto& r : records) {
    out += dump_line(to_json(r));
    out += '\n';
  }
  return out;
}

std::vector<ResultRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open records " + path.string());
  std::vector<ResultRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::string prompt_digest(const std::vector<std::string>& prompts) {
  return sha256_hex(json(prompts).dump(-1, ' ', false, json::error_handler_t::replace));
}

EvalOutcome run_eval(const EvalConfig& config, const EvalEnvironment& env) {
  config.validate();
  const Task task = load_task(config.task);
  const TemplateSet templates = TemplateSet::load_directory(config.templates, task.name);
  for (const auto& [lang, tmpl] : templates.all()) check_binding(tmpl, task);
  const auto backend = env.backend ? env.backend : make_backend(config);

  std::shared_ptr<const Translator> translator = env.translator;
  if (!translator && config.translate_test) {
    translator = std::make_shared<HttpTranslator>(*config.translate_test);
    if (const auto dir = resolve_cache_dir(config.cache_dir)) {
      translator = std::make_shared<CachedTranslator>(translator, *dir);
    }
  }

  std::vector<LanguageCode> langs;
  for (const auto& info : task.languages) {
    if (config.languages.empty() ||
        std::find(config.languages.begin(), config.languages.end(), info.code.str()) != config.languages.end()) {
      langs.push_back(info.code);
    }
  }
  const auto& eval_split = task.split(config.eval_split);

  std::vector<ResultRecord> records;
  for (const auto& lang : langs) {
    std::vector<Example> examples;
    std::copy_if(eval_split.begin(), eval_split.end(), std::back_inserter(examples),
                 [&](const Example& ex) { return ex.lang == lang; });
    if (examples.empty()) continue;

    for (const auto k : config.shots) {
      const std::size_t runs = k == 0 ? 1 : config.n_runs;
      for (std::size_t run = 0; run < runs; ++run) {
        const Cell cell{task, config, templates, *backend, lang, k, run, config.base_seed + run};
        try {
          std::vector<Example> targets = examples;
          if (config.probe_candidates) {
            for (auto& ex : targets) {
              ex = downsample_candidates(ex, *config.probe_candidates, derive_seed(config.base_seed, "probe:" + ex.id));
            }
          }
          std::vector<Example> pool;
          if (k > 0) pool = demo_pool(task, config.eval_split, config.demo_lang.value_or(lang));
          if (translator) {
            targets = translate_test_transform(targets, *translator, config.translate_target);
            pool = translate_test_transform(pool, *translator, config.translate_target);
          }
          auto cell_records = evaluate_cell(cell, targets, pool);
          records.insert(records.end(), std::make_move_iterator(cell_records.begin()),
                         std::make_move_iterator(cell_records.end()));
        } catch (const std::exception& e) {
          ResultRecord failure = base_record(cell);
          failure.status = "failed";
          failure.error = e.what();
          records.push_back(std::move(failure));
        }
      }
    }
  }

  std::filesystem::create_directories(config.out_dir);
  EvalOutcome outcome;
  outcome.records_path = config.out_dir / "records.jsonl";
  write_atomically(outcome.records_path, to_jsonl(records));

  json manifest{{"config", to_json(config)}, {"backend", backend->cache_identity()}, {"task", task.name}};
  if (config.translate_test) {
    manifest["notes"] = json::array({"translate-test translates every example entering the pipeline, demonstrations included"});
  }
  write_atomically(config.out_dir / "run_manifest.json", manifest.dump(2) + "\n");

  outcome.report_paths = render_report(outcome.records_path, config.out_dir, Grouping{true, true});
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return sort_key(a) < sort_key(b); });
  outcome.records = std::move(records);
  return outcome;
}

}  // namespace xshot
