// Command-line front end: train-ngram, eval, maxfit, report.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "xshot/config.hpp"
#include "xshot/error.hpp"
#include "xshot/fewshot.hpp"
#include "xshot/ngram.hpp"
#include "xshot/report.hpp"
#include "xshot/runner.hpp"

namespace {

// "\n", "\t" and "\\" as typed on a shell command line.
std::string unescape(const std::string& raw) {
  std::string out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] == '\\' && i + 1 < raw.size()) {
      const char next = raw[++i];
      if (next == 'n') {
        out.push_back('\n');
      } else if (next == 't') {
        out.push_back('\t');
      } else {
        out.push_back(next);
      }
    } else {
      out.push_back(raw[i]);
    }
  }
  return out;
}

std::vector<std::size_t> parse_shots(const std::string& list) {
  std::vector<std::size_t> shots;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) shots.push_back(std::stoul(item));
  return shots;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilingual few-shot prompting and evaluation harness"};
  app.require_subcommand(1);

  // train-ngram
  auto* train = app.add_subcommand("train-ngram", "Train a byte n-gram oracle model");
  std::string corpus, model_out;
  int order = 3;
  double add_k = 0.01;
  train->add_option("--corpus", corpus, "UTF-8 training text")->required();
  train->add_option("--order", order, "n-gram order")->required();
  train->add_option("--add-k", add_k, "add-k smoothing constant")->required();
  train->add_option("--out", model_out, "model file to write")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Run an evaluation");
  std::string config_path, task, templates, backend, shots, scoring, template_mode, template_lang, demo_lang,
      translate_test, out_dir, split, cache_dir, strategy, sep;
  std::size_t runs = 0, probe = 0, threads = 0, context_length = 0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  bool calibrate = false, record_prompts = false;
  eval->add_option("--config", config_path, "JSON config file");
  eval->add_option("--task", task, "task manifest");
  eval->add_option("--templates", templates, "template descriptor directory");
  eval->add_option("--backend", backend, "uniform | ngram:PATH | context-cache:PATH | remote:URL");
  eval->add_option("--shots", shots, "comma-separated k values, e.g. 0,4");
  eval->add_option("--runs", runs, "runs per few-shot setting");
  eval->add_option("--seed", seed, "base seed");
  eval->add_option("--scoring", scoring, "sum | mean | mean-skip-prefix | suffix | uncond | char");
  eval->add_flag("--calibrate", calibrate, "content-free calibration");
  eval->add_option("--template-mode", template_mode, "same | source");
  eval->add_option("--template-lang", template_lang, "source template language");
  eval->add_option("--demo-lang", demo_lang, "demonstration language");
  eval->add_option("--translate-test", translate_test, "translator URL");
  eval->add_option("--probe-candidates", probe, "down-sample candidates to this many");
  eval->add_option("--out", out_dir, "output directory");
  eval->add_option("--split", split, "evaluation split");
  eval->add_option("--cache-dir", cache_dir, "response cache directory");
  eval->add_option("--strategy", strategy, "random-total | per-class-uniform");
  eval->add_option("--sep", sep, "demonstration separator (escapes allowed)");
  eval->add_option("--threads", threads, "examples evaluated concurrently");
  eval->add_option("--context-length", context_length, "context length of oracle backends");
  eval->add_option("--lambda", lambda, "context-cache interpolation weight");
  eval->add_flag("--record-prompts", record_prompts, "store scored prompt strings in records");

  // maxfit
  auto* maxfit = app.add_subcommand("maxfit", "Average number of demonstrations that fit the context");
  std::string mf_task, mf_templates, mf_backend = "uniform", mf_sep = "\\n", mf_split = "test", mf_out, mf_mode = "same",
                                     mf_lang = "en";
  std::size_t mf_ctx = 2048;
  std::uint64_t mf_seed = 0;
  maxfit->add_option("--task", mf_task, "task manifest")->required();
  maxfit->add_option("--templates", mf_templates, "template descriptor directory")->required();
  maxfit->add_option("--backend", mf_backend, "backend spec");
  maxfit->add_option("--sep", mf_sep, "separator (escapes allowed)");
  maxfit->add_option("--split", mf_split, "evaluation split");
  maxfit->add_option("--seed", mf_seed, "demonstration order seed");
  maxfit->add_option("--context-length", mf_ctx, "context length of oracle backends");
  maxfit->add_option("--template-mode", mf_mode, "same | source");
  maxfit->add_option("--template-lang", mf_lang, "source template language");
  maxfit->add_option("--out", mf_out, "CSV path (default: stdout)");

  // report
  auto* report = app.add_subcommand("report", "Render tables from persisted records");
  std::string report_in, report_out, group_by = "lang,resource_level";
  report->add_option("--in", report_in, "directory holding records.jsonl")->required();
  report->add_option("--group-by", group_by, "lang, resource_level or both");
  report->add_option("--out", report_out, "output directory (default: --in)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      xshot::NgramModel::train_file(corpus, order, add_k).save(model_out);
      return 0;
    }

    if (*eval) {
      nlohmann::json doc = nlohmann::json::object();
      std::filesystem::path base;
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw xshot::Error("cannot open config " + config_path);
        doc = nlohmann::json::parse(in);
        base = std::filesystem::path(config_path).parent_path();
      }
      // Flags override config fields; flag paths are relative to the working directory.
      auto cwd_path = [](const std::string& p) { return std::filesystem::absolute(p).string(); };
      if (!task.empty()) doc["task"] = cwd_path(task);
      if (!templates.empty()) doc["templates"] = cwd_path(templates);
      if (!backend.empty()) {
        for (const std::string prefix : {"ngram:", "context-cache:"}) {
          if (backend.starts_with(prefix)) backend = prefix + cwd_path(backend.substr(prefix.size()));
        }
        doc["backend"] = backend;
      }
      if (!shots.empty()) doc["shots"] = parse_shots(shots);
      if (eval->count("--runs")) doc["runs"] = runs;
      if (eval->count("--seed")) doc["seed"] = seed;
      if (!scoring.empty()) doc["scoring"] = scoring;
      if (calibrate) doc["calibrate"] = true;
      if (!template_mode.empty()) doc["template_mode"] = template_mode;
      if (!template_lang.empty()) doc["template_lang"] = template_lang;
      if (!demo_lang.empty()) doc["demo_lang"] = demo_lang;
      if (!translate_test.empty()) doc["translate_test"] = translate_test;
      if (eval->count("--probe-candidates")) doc["probe_candidates"] = probe;
      if (!out_dir.empty()) doc["out"] = cwd_path(out_dir);
      if (!split.empty()) doc["eval_split"] = split;
      if (!cache_dir.empty()) doc["cache_dir"] = cwd_path(cache_dir);
      if (!strategy.empty()) doc["strategy"] = strategy;
      if (eval->count("--sep")) doc["separator"] = unescape(sep);
      if (eval->count("--threads")) doc["threads"] = threads;
      if (eval->count("--context-length")) doc["context_length"] = context_length;
      if (eval->count("--lambda")) doc["cache_lambda"] = lambda;
      if (record_prompts) doc["record_prompts"] = true;
      if (!doc.contains("task") || !doc.contains("templates")) throw xshot::Error("eval needs --task and --templates (or a config)");

      const auto config = xshot::parse_eval_config(doc, base);
      const auto outcome = xshot::run_eval(config);
      std::size_t failed = 0;
      for (const auto& r : outcome.records) failed += r.failed() ? 1 : 0;
      std::ifstream table(config.out_dir / "report.txt");
      std::cout << table.rdbuf();
      if (failed > 0) std::cerr << failed << " cell(s) failed; see records.jsonl\n";
      return 0;
    }

    if (*maxfit) {
      const auto loaded = xshot::load_task(mf_task);
      const auto set = xshot::TemplateSet::load_directory(mf_templates, loaded.name);
      const auto model = xshot::make_backend(mf_backend, mf_ctx);
      xshot::MaxFitOptions options;
      options.eval_split = mf_split;
      options.sep.separator = unescape(mf_sep);
      options.seed = mf_seed;
      if (mf_mode == "source") options.template_mode = xshot::TemplateMode::source_language(xshot::LanguageCode(mf_lang));
      const auto csv = xshot::max_fit_csv(xshot::max_fit_stats(loaded, set, *model, options));
      if (mf_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream(mf_out) << csv;
      }
      return 0;
    }

    if (*report) {
      xshot::Grouping grouping{false, false};
      std::stringstream in(group_by);
      std::string key;
      while (std::getline(in, key, ',')) {
        if (key == "lang") {
          grouping.by_lang = true;
        } else if (key == "resource_level") {
          grouping.by_resource_level = true;
        } else {
          throw xshot::Error("unknown --group-by key '" + key + "'");
        }
      }
      const std::filesystem::path dir(report_in);
      const auto paths = xshot::render_report(dir / "records.jsonl", report_out.empty() ? dir : std::filesystem::path(report_out), grouping);
      std::ifstream table(paths.at(1));
      std::cout << table.rdbuf();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
