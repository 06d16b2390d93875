#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "xshot/config.hpp"
#include "xshot/translator.hpp"

namespace xshot {

/// One evaluated example, or one failed (task, lang, k, run) cell when status != "ok".
struct ResultRecord {
  std::string task;
  std::string lang;
  ResourceLevel resource_level = ResourceLevel::unknown;
  std::string metric;
  std::string positive_label;
  std::size_t k = 0;
  std::size_t run = 0;
  std::uint64_t run_seed = 0;
  std::string example_id;
  std::string status = "ok";
  std::string error;

  std::string gold;
  std::string prediction;
  bool correct = false;
  std::vector<double> scores;
  std::string relation;
  std::string prompt_digest;
  std::size_t kept_demos = 0;
  std::size_t dropped_demos = 0;
  std::vector<std::string> prompts;  // only with record_prompts

  bool failed() const { return status != "ok"; }
};

nlohmann::json to_json(const ResultRecord& record);
ResultRecord record_from_json(const nlohmann::json& doc);

/// Records as sorted canonical JSONL.
std::string to_jsonl(std::vector<ResultRecord> records);
std::vector<ResultRecord> read_records(const std::filesystem::path& path);

/// SHA-256 over the canonical JSON array of the scored strings.
std::string prompt_digest(const std::vector<std::string>& prompts);

/// Optional injected dependencies; unset members are built from the config.
struct EvalEnvironment {
  std::shared_ptr<const LanguageModel> backend;
  std::shared_ptr<const Translator> translator;
};

struct EvalOutcome {
  std::vector<ResultRecord> records;
  std::filesystem::path records_path;
  std::vector<std::filesystem::path> report_paths;
};

/// Runs every (lang, k, run) cell, writes records.jsonl, run_manifest.json and
/// the reports into config.out_dir. k = 0 runs once; k > 0 uses seeds base_seed + r.
EvalOutcome run_eval(const EvalConfig& config, const EvalEnvironment& env = {});

}  // namespace xshot
