#include "xshot/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "xshot/error.hpp"
#include "xshot/text.hpp"

namespace xshot {

namespace {
void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw Error("length mismatch: " + std::to_string(a) + " predictions vs " + std::to_string(b) + " golds");
  if (a == 0) throw Error("metric over an empty set");
}
}  // namespace

double accuracy(std::span<const std::string> preds, std::span<const std::string> golds) {
  check_aligned(preds.size(), golds.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == golds[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

PrecisionRecall precision_recall(std::span<const std::string> preds, std::span<const std::string> golds,
                                 const std::string& positive_label, std::span<const std::string> label_space) {
  check_aligned(preds.size(), golds.size());
  if (!label_space.empty() && std::find(label_space.begin(), label_space.end(), positive_label) == label_space.end()) {
    throw Error("unknown positive label '" + positive_label + "'");
  }
  if (label_space.empty() && std::find(golds.begin(), golds.end(), positive_label) == golds.end() &&
      std::find(preds.begin(), preds.end(), positive_label) == preds.end()) {
    throw Error("unknown positive label '" + positive_label + "'");
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] == positive_label;
    const bool g = golds[i] == positive_label;
    tp += (p && g) ? 1 : 0;
    fp += (p && !g) ? 1 : 0;
    fn += (!p && g) ? 1 : 0;
  }
  PrecisionRecall pr;
  if (tp + fp == 0) {
    pr.precision_undefined = true;
  } else {
    pr.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  if (tp + fn == 0) {
    pr.recall_undefined = true;
  } else {
    pr.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  return pr;
}

double precision_at_1(std::span<const ProbeOutcome> outcomes) {
  if (outcomes.empty()) throw Error("precision@1 over an empty set");
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_relation;  // hits, total
  for (const auto& o : outcomes) {
    auto& [hits, total] = per_relation[o.relation];
    hits += o.predicted == o.gold ? 1 : 0;
    ++total;
  }
  double sum = 0.0;
  for (const auto& [relation, counts] : per_relation) {
    sum += static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return sum / static_cast<double>(per_relation.size());
}

BleuResult corpus_bleu(std::span<const std::string> hypotheses, std::span<const std::string> references, int max_n) {
  check_aligned(hypotheses.size(), references.size());
  if (max_n < 1) throw Error("BLEU max_n must be at least 1");
  const auto n = static_cast<std::size_t>(max_n);
  std::vector<std::size_t> matched(n, 0), total(n, 0);
  BleuResult result;

  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    const auto hyp = text::split_whitespace(text::nfc(hypotheses[s]));
    const auto ref = text::split_whitespace(text::nfc(references[s]));
    if (ref.empty()) throw Error("empty reference at sentence " + std::to_string(s));
    result.hypothesis_length += hyp.size();
    result.reference_length += ref.size();
    for (std::size_t order = 1; order <= n; ++order) {
      std::map<std::vector<std::string>, std::size_t> ref_counts;
      for (std::size_t i = 0; i + order <= ref.size(); ++i) {
        ++ref_counts[std::vector<std::string>(ref.begin() + static_cast<std::ptrdiff_t>(i),
                                              ref.begin() + static_cast<std::ptrdiff_t>(i + order))];
      }
      std::map<std::vector<std::string>, std::size_t> hyp_counts;
      for (std::size_t i = 0; i + order <= hyp.size(); ++i) {
        ++hyp_counts[std::vector<std::string>(hyp.begin() + static_cast<std::ptrdiff_t>(i),
                                              hyp.begin() + static_cast<std::ptrdiff_t>(i + order))];
      }
      for (const auto& [gram, count] : hyp_counts) {
        const auto it = ref_counts.find(gram);
        matched[order - 1] += std::min(count, it == ref_counts.end() ? std::size_t{0} : it->second);
        total[order - 1] += count;
      }
    }
  }

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = total[i] == 0 ? 0.0 : static_cast<double>(matched[i]) / static_cast<double>(total[i]);
    result.precisions.push_back(p);
    if (p == 0.0) {
      zero = true;
    } else {
      log_sum += std::log(p);
    }
  }
  const auto c = static_cast<double>(result.hypothesis_length);
  const auto r = static_cast<double>(result.reference_length);
  result.brevity_penalty = c == 0.0 ? 0.0 : std::min(1.0, std::exp(1.0 - r / c));
  result.score = zero ? 0.0 : 100.0 * result.brevity_penalty * std::exp(log_sum / static_cast<double>(n));
  return result;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error("mean of an empty set");
  double total = 0.0;
  for (const double v : values) total += v;
  return total / static_cast<double>(values.size());
}

double sample_std(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (const double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

std::vector<AggregateResult> aggregate(std::span<const RunMetric> records, const Grouping& grouping) {
  if (records.empty()) throw Error("aggregate: no run records");
  using Key = std::tuple<std::string, std::size_t, std::string, std::string, std::string>;
  // Per group and run: values of the member languages (one per language when grouped by level).
  std::map<Key, std::map<std::uint64_t, std::vector<double>>> groups;
  for (const auto& r : records) {
    const Key key{r.task, r.k, r.metric, grouping.by_lang ? r.lang : std::string(),
                  grouping.by_resource_level ? std::string(to_string(r.resource_level)) : std::string()};
    groups[key][r.run_seed].push_back(r.value);
  }
  std::vector<AggregateResult> out;
  for (const auto& [key, runs] : groups) {
    std::vector<double> per_run;
    for (const auto& [seed, values] : runs) per_run.push_back(mean(values));
    AggregateResult agg;
    std::tie(agg.task, agg.k, agg.metric, agg.lang, agg.resource_level) = key;
    agg.mean = mean(per_run);
    agg.sample_std = sample_std(per_run);
    agg.n_runs = per_run.size();
    out.push_back(std::move(agg));
  }
  return out;
}

}  // namespace xshot
