#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "xshot/backend.hpp"
#include "xshot/fewshot.hpp"
#include "xshot/scoring.hpp"
#include "xshot/template.hpp"

namespace xshot {

/// Everything needed to reproduce one evaluation. Mirrors the JSON config file.
struct EvalConfig {
  std::filesystem::path task;
  std::filesystem::path templates;
  /// "uniform", "ngram:PATH", "context-cache:PATH" or "remote:URL".
  std::string backend = "uniform";
  std::size_t context_length = 2048;  // oracle backends only
  double cache_lambda = 0.5;          // context-cache backend only
  int remote_max_in_flight = 4;

  std::string eval_split = "test";
  std::vector<std::string> languages;  // empty: every task language

  ScoringFunction scoring;
  CalibrationSpec calibration;

  std::vector<std::size_t> shots{0};
  std::size_t n_runs = 5;
  std::uint64_t base_seed = 0;
  SamplingStrategy strategy = SamplingStrategy::random_total;
  SeparatorSpec sep;
  bool resample_per_example = false;

  TemplateMode template_mode = TemplateMode::same_language();
  std::optional<LanguageCode> demo_lang;

  std::optional<std::string> translate_test;  // translator URL
  LanguageCode translate_target{"en"};

  std::optional<std::size_t> probe_candidates;

  GenerationParams generation{64, {"\n"}};

  std::optional<std::filesystem::path> cache_dir;
  std::filesystem::path out_dir = "results";
  bool record_prompts = false;
  std::size_t threads = 1;

  void validate() const;
};

/// Relative paths resolve against `base_dir`.
EvalConfig parse_eval_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
EvalConfig load_eval_config(const std::filesystem::path& path);
nlohmann::json to_json(const EvalConfig& config);

/// Builds the backend named by `config.backend`, wrapped in the disk cache
/// when a cache directory is configured (or set via XSHOT_CACHE_DIR).
std::shared_ptr<const LanguageModel> make_backend(const EvalConfig& config);
std::shared_ptr<const LanguageModel> make_backend(const std::string& spec, std::size_t context_length = 2048,
                                                  double cache_lambda = 0.5, int max_in_flight = 4);

}  // namespace xshot
