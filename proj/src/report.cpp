#include "xshot/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "xshot/error.hpp"

namespace xshot {

namespace {

std::string fmt4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

constexpr ResourceLevel kLevelOrder[] = {ResourceLevel::high, ResourceLevel::medium, ResourceLevel::low,
                                         ResourceLevel::extremely_low, ResourceLevel::unknown};

std::string align(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& row : rows) {
    width.resize(std::max(width.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) line += "  ";
      const auto pad = width[i] - row[i].size();
      // Text columns left-aligned, numbers right-aligned.
      if (i < 3) {
        line += row[i] + std::string(pad, ' ');
      } else {
        line += std::string(pad, ' ') + row[i];
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

}  // namespace

std::vector<RunMetric> run_metrics(std::span<const ResultRecord> records) {
  using CellKey = std::tuple<std::string, std::string, std::size_t, std::size_t>;  // task, lang, k, run
  std::map<CellKey, std::vector<const ResultRecord*>> cells;
  for (const auto& r : records) {
    if (!r.failed()) cells[{r.task, r.lang, r.k, r.run}].push_back(&r);
  }
  std::vector<RunMetric> out;
  for (const auto& [key, members] : cells) {
    const ResultRecord& first = *members.front();
    RunMetric base{first.task, first.lang, first.resource_level, first.k, {}, first.run_seed, 0.0};
    std::vector<std::string> preds, golds;
    std::vector<ProbeOutcome> probes;
    for (const auto* r : members) {
      preds.push_back(r->prediction);
      golds.push_back(r->gold);
      probes.push_back({r->relation, r->prediction, r->gold});
    }
    auto emit = [&](std::string metric, double value) {
      RunMetric m = base;
      m.metric = std::move(metric);
      m.value = value;
      out.push_back(std::move(m));
    };
    if (first.metric == "accuracy") {
      emit("accuracy", accuracy(preds, golds));
    } else if (first.metric == "precision-recall") {
      const auto pr = precision_recall(preds, golds, first.positive_label);
      emit("accuracy", accuracy(preds, golds));
      emit("precision", pr.precision);
      emit("recall", pr.recall);
    } else if (first.metric == "precision-at-1") {
      emit("precision@1", precision_at_1(probes));
    } else if (first.metric == "corpus-bleu") {
      emit("bleu-ws", corpus_bleu(preds, golds).score);
    } else {
      throw Error("unknown metric '" + first.metric + "' in records");
    }
  }
  return out;
}

ReportTables build_report(std::span<const ResultRecord> records, const Grouping& grouping) {
  if (records.empty()) throw Error("no records to report");
  const auto metrics = run_metrics(records);

  std::set<std::string> langs;
  std::set<ResourceLevel> levels;
  for (const auto& m : metrics) {
    langs.insert(m.lang);
    levels.insert(m.resource_level);
  }
  const auto by_lang = metrics.empty() ? std::vector<AggregateResult>{} : aggregate(metrics, {true, false});
  const auto by_level = metrics.empty() ? std::vector<AggregateResult>{} : aggregate(metrics, {false, true});
  const auto overall = metrics.empty() ? std::vector<AggregateResult>{} : aggregate(metrics, {false, false});

  using RowKey = std::tuple<std::string, std::size_t, std::string>;
  std::map<RowKey, std::map<std::string, double>> table;
  for (const auto& a : by_lang) table[{a.task, a.k, a.metric}]["lang:" + a.lang] = a.mean;
  for (const auto& a : by_level) table[{a.task, a.k, a.metric}]["level:" + a.resource_level] = a.mean;
  for (const auto& a : overall) table[{a.task, a.k, a.metric}]["Avg."] = a.mean;

  std::vector<std::string> header{"task", "k", "metric"};
  std::vector<std::string> columns;
  if (grouping.by_lang) {
    for (const auto& l : langs) {
      header.push_back(l);
      columns.push_back("lang:" + l);
    }
  }
  if (grouping.by_resource_level) {
    for (const auto level : kLevelOrder) {
      if (!levels.contains(level)) continue;
      header.push_back(std::string(to_string(level)));
      columns.push_back("level:" + std::string(to_string(level)));
    }
  }
  header.push_back("Avg.");
  columns.push_back("Avg.");

  std::vector<std::vector<std::string>> rows{header};
  for (const auto& [key, cells] : table) {
    std::vector<std::string> row{std::get<0>(key), std::to_string(std::get<1>(key)), std::get<2>(key)};
    for (const auto& c : columns) {
      const auto it = cells.find(c);
      row.push_back(it == cells.end() ? "" : fmt4(it->second));
    }
    rows.push_back(std::move(row));
  }

  ReportTables tables;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) tables.csv += (i ? "," : "") + row[i];
    tables.csv += "\n";
  }
  tables.text = align(rows);
  std::vector<std::string> failures;
  for (const auto& r : records) {
    if (r.failed()) failures.push_back(r.task + " lang=" + r.lang + " k=" + std::to_string(r.k) + " run=" + std::to_string(r.run) + ": " + r.error);
  }
  if (!failures.empty()) {
    tables.text += "\nFailed cells:\n";
    for (const auto& f : failures) tables.text += "  " + f + "\n";
  }

  tables.aggregate = "task,k,metric,lang,resource_level,mean,std,n_runs\n";
  const auto long_form = metrics.empty() ? std::vector<AggregateResult>{} : aggregate(metrics, {true, true});
  for (const auto& a : long_form) {
    tables.aggregate += a.task + "," + std::to_string(a.k) + "," + a.metric + "," + a.lang + "," + a.resource_level + "," +
                        fmt4(a.mean) + "," + fmt4(a.sample_std) + "," + std::to_string(a.n_runs) + "\n";
  }
  return tables;
}

std::vector<std::filesystem::path> render_report(const std::filesystem::path& records_path,
                                                 const std::filesystem::path& out_dir, const Grouping& grouping) {
  const auto records = read_records(records_path);
  const auto tables = build_report(records, grouping);
  std::filesystem::create_directories(out_dir);
  const std::vector<std::pair<std::string, const std::string*>> files{
      {"report.csv", &tables.csv}, {"report.txt", &tables.text}, {"aggregate.csv", &tables.aggregate}};
  std::vector<std::filesystem::path> written;
  for (const auto& [name, content] : files) {
    const auto path = out_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << *content;
    written.push_back(path);
  }
  return written;
}

}  // namespace xshot
