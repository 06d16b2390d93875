#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "xshot/metrics.hpp"
#include "xshot/runner.hpp"

namespace xshot {

/// Metric values per (lang, k, run) computed from successful records.
std::vector<RunMetric> run_metrics(std::span<const ResultRecord> records);

struct ReportTables {
  std::string csv;        // wide: task,k,metric,<langs>,<levels>,Avg.
  std::string text;       // the same table, column aligned, plus failures
  std::string aggregate;  // long: task,k,metric,lang,resource_level,mean,std,n_runs
};

ReportTables build_report(std::span<const ResultRecord> records, const Grouping& grouping);

/// Reads records.jsonl and writes report.csv, report.txt and aggregate.csv to `out_dir`.
std::vector<std::filesystem::path> render_report(const std::filesystem::path& records_path,
                                                 const std::filesystem::path& out_dir, const Grouping& grouping);

}  // namespace xshot
