#pragma once

// Report rendering: aligned text tables, the benchmark and search summaries,
// cross-validation and training-history CSVs.

#include <algorithm>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rnnsec/dataset.hpp"
#include "rnnsec/error.hpp"
#include "rnnsec/evaluation.hpp"
#include "rnnsec/model.hpp"
#include "rnnsec/search.hpp"

namespace rnnsec {

// Columns joined by " | ". Every column but the last is padded to its widest
// cell; a dashed rule separates the header from the rows.
struct TextTable {
  std::vector<std::string> headers;
  std::vector<std::vector<std::string>> rows;

  std::string render() const {
    const std::size_t n = headers.size();
    std::vector<std::size_t> width(n, 0);
    for (std::size_t c = 0; c < n; ++c) width[c] = headers[c].size();
    for (const auto& row : rows) {
      if (row.size() != n) throw ArgumentError("text table row has the wrong number of cells");
      for (std::size_t c = 0; c < n; ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t c = 0; c < n; ++c) {
        out += cells[c];
        if (c + 1 < n) {
          out.append(width[c] - cells[c].size(), ' ');
          out += " | ";
        }
      }
      out += '\n';
    };
    line(headers);
    for (std::size_t c = 0; c < n; ++c) {
      out.append(width[c], '-');
      if (c + 1 < n) out += "-+-";
    }
    out += '\n';
    for (const auto& row : rows) line(row);
    return out;
  }
};

// Three decimals, as printed in the summary tables.
inline std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string depth_label(std::size_t depth) {
  return "RNN " + std::to_string(depth) + " layer";
}

// ---------------------------------------------------------------------------
// Benchmark (algorithm x task metrics)

struct BenchmarkRow {
  std::string algorithm;
  std::string task_name;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;

  friend bool operator==(const BenchmarkRow&, const BenchmarkRow&) = default;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;

  friend bool operator==(const BenchmarkReport&, const BenchmarkReport&) = default;
};

inline BenchmarkRow benchmark_row(std::string algorithm, std::string task_name,
                                  const MetricsReport& m) {
  return {std::move(algorithm), std::move(task_name), m.accuracy, m.precision, m.recall,
          m.f_score};
}

inline constexpr const char* kBenchmarkHeader =
    "Algorithm,Task Name,Accuracy,Precision,Recall,F-score";

inline void write_benchmark_csv(std::ostream& out, const BenchmarkReport& report) {
  out << kBenchmarkHeader << '\n';
  for (const auto& r : report.rows) {
    if (r.algorithm.find_first_of(",\n") != std::string::npos ||
        r.task_name.find_first_of(",\n") != std::string::npos) {
      throw ArgumentError("benchmark names may not contain commas or newlines");
    }
    out << r.algorithm << ',' << r.task_name << ',' << format_double(r.accuracy) << ','
        << format_double(r.precision) << ',' << format_double(r.recall) << ','
        << format_double(r.f_score) << '\n';
  }
}

inline BenchmarkReport read_benchmark_csv(std::istream& in, const std::string& source = "<stream>") {
  BenchmarkReport report;
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kBenchmarkHeader) {
    throw DataError(source + ": missing benchmark header '" + kBenchmarkHeader + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    auto f = detail::split_fields(view);
    if (f.size() != 6) {
      throw DataError(source + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(f.size()) + " columns, expected 6");
    }
    BenchmarkRow row{std::string(f[0]), std::string(f[1])};
    double* slots[] = {&row.accuracy, &row.precision, &row.recall, &row.f_score};
    for (std::size_t i = 0; i < 4; ++i) {
      auto v = detail::parse_double(f[i + 2]);
      if (!v) {
        throw DataError(source + ": row " + std::to_string(line_no) + ", column " +
                        std::to_string(i + 3) + ": '" + std::string(f[i + 2]) +
                        "' is not a number");
      }
      *slots[i] = *v;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

inline std::string benchmark_text(const BenchmarkReport& report) {
  TextTable t{{"Algorithm", "Task Name", "Accuracy", "Precision", "Recall", "F-score"}, {}};
  for (const auto& r : report.rows) {
    t.rows.push_back({r.algorithm, r.task_name, format_metric(r.accuracy),
                      format_metric(r.precision), format_metric(r.recall),
                      format_metric(r.f_score)});
  }
  return t.render();
}

// ---------------------------------------------------------------------------
// Search results

inline std::string candidate_label(Stage stage, const Candidate& c) {
  switch (stage) {
    case Stage::units: return std::to_string(static_cast<std::size_t>(c.value)) + " units";
    case Stage::lr: return "lr " + format_double(c.value);
    case Stage::depth: return depth_label(static_cast<std::size_t>(c.value));
  }
  return format_double(c.value);
}

// One line per (candidate, trial) in candidate-then-trial order.
inline void write_search_csv(std::ostream& out, const SearchResult& result) {
  std::vector<SearchRow> rows = result.rows;
  std::sort(rows.begin(), rows.end(), [](const SearchRow& a, const SearchRow& b) {
    return a.candidate != b.candidate ? a.candidate < b.candidate : a.trial < b.trial;
  });
  out << "stage,task,candidate,value,parameters,trial,accuracy,diverged,selected\n";
  for (const SearchRow& r : rows) {
    const Candidate& c = result.candidates.at(r.candidate);
    out << to_string(result.stage) << ',' << to_string(result.task) << ',' << r.candidate << ','
        << format_double(c.value) << ',' << c.parameter_count << ',' << r.trial << ','
        << format_double(r.accuracy) << ',' << (r.diverged ? 1 : 0) << ','
        << (r.candidate == result.selected ? 1 : 0) << '\n';
  }
}

// Mean accuracy per candidate in the three-column layout
// "RNN 3 layer | Task 2 | 0.827", followed by the selection.
inline std::string search_text(const SearchResult& result) {
  const std::vector<double> means = candidate_means(result);
  TextTable t{{"Topology", "Task", "Accuracy"}, {}};
  for (std::size_t c = 0; c < result.candidates.size(); ++c) {
    t.rows.push_back({candidate_label(result.stage, result.candidates[c]),
                      task_label(result.task), format_metric(means[c])});
  }
  return t.render() + "\nselected: " +
         candidate_label(result.stage, result.candidates.at(result.selected)) + '\n';
}

// ---------------------------------------------------------------------------
// Cross-validation: k fold rows, then a mean row.

inline void write_crossval_csv(std::ostream& out, const CrossValidationResult& cv) {
  out << "fold,accuracy,precision,recall,f_score\n";
  double sums[4] = {0, 0, 0, 0};
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    const MetricsReport& m = cv.folds[f];
    out << f << ',' << format_double(m.accuracy) << ',' << format_double(m.precision) << ','
        << format_double(m.recall) << ',' << format_double(m.f_score) << '\n';
    sums[0] += m.accuracy;
    sums[1] += m.precision;
    sums[2] += m.recall;
    sums[3] += m.f_score;
  }
  const double k = static_cast<double>(std::max<std::size_t>(cv.folds.size(), 1));
  out << "mean," << format_double(cv.mean_accuracy) << ',' << format_double(sums[1] / k) << ','
      << format_double(sums[2] / k) << ',' << format_double(sums[3] / k) << '\n';
}

inline std::string crossval_text(const CrossValidationResult& cv) {
  TextTable t{{"Fold", "Accuracy", "Precision", "Recall", "F-score"}, {}};
  for (std::size_t f = 0; f < cv.folds.size(); ++f) {
    const MetricsReport& m = cv.folds[f];
    t.rows.push_back({std::to_string(f), format_metric(m.accuracy), format_metric(m.precision),
                      format_metric(m.recall), format_metric(m.f_score)});
  }
  return t.render() + "\nmean accuracy: " + format_metric(cv.mean_accuracy) + '\n';
}

// ---------------------------------------------------------------------------
// Training history. Wall-clock time is left out so reruns are byte-identical.

inline void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,loss,accuracy\n";
  for (std::size_t e = 0; e < history.size(); ++e) {
    out << e + 1 << ',' << format_double(history[e].loss) << ','
        << format_double(history[e].accuracy) << '\n';
  }
}

inline void write_metrics_csv(std::ostream& out, const std::string& algorithm,
                              const std::string& task_name, const MetricsReport& m) {
  write_benchmark_csv(out, BenchmarkReport{{benchmark_row(algorithm, task_name, m)}});
}

}  // namespace rnnsec
