#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xshot/task.hpp"

namespace xshot {

double accuracy(std::span<const std::string> preds, std::span<const std::string> golds);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  bool precision_undefined = false;  // no positive predictions
  bool recall_undefined = false;     // no positive golds
};

/// Binary precision/recall for `positive_label`; zero denominators give 0 plus a flag.
PrecisionRecall precision_recall(std::span<const std::string> preds, std::span<const std::string> golds,
                                 const std::string& positive_label, std::span<const std::string> label_space = {});

struct ProbeOutcome {
  std::string relation;
  std::string predicted;
  std::string gold;
};

/// Per-relation accuracy, macro-averaged over relations.
double precision_at_1(std::span<const ProbeOutcome> outcomes);

struct BleuResult {
  double score = 0.0;  // [0, 100]
  std::vector<double> precisions;
  double brevity_penalty = 0.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
};

/// Unsmoothed corpus BLEU over NFC text split on Unicode white space.
BleuResult corpus_bleu(std::span<const std::string> hypotheses, std::span<const std::string> references, int max_n = 4);

/// One metric value from one run of one (task, lang, k) cell.
struct RunMetric {
  std::string task;
  std::string lang;
  ResourceLevel resource_level = ResourceLevel::unknown;
  std::size_t k = 0;
  std::string metric;
  std::uint64_t run_seed = 0;
  double value = 0.0;
};

struct Grouping {
  bool by_lang = true;
  bool by_resource_level = false;
};

struct AggregateResult {
  std::string task;
  std::size_t k = 0;
  std::string metric;
  std::string lang;            // empty unless grouped by language
  std::string resource_level;  // empty unless grouped by resource level
  double mean = 0.0;
  double sample_std = 0.0;
  std::size_t n_runs = 0;
};

/// Mean and sample standard deviation over runs per group, sorted by keys.
/// Resource-level groups average the member languages within each run first.
std::vector<AggregateResult> aggregate(std::span<const RunMetric> records, const Grouping& grouping);

double mean(std::span<const double> values);
/// Zero for fewer than two values.
double sample_std(std::span<const double> values);

}  // namespace xshot
