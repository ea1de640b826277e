#pragma once

// Task schemas, CSV ingestion, stratified splitting, tabular-to-sequence
// encoding, and the synthetic generators that stand in for the three
// security corpora.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "rnnsec/error.hpp"
#include "rnnsec/tensor.hpp"

namespace rnnsec {

enum class Task { task1, task2, task3, custom };

inline std::string to_string(Task t) {
  switch (t) {
    case Task::task1: return "task1";
    case Task::task2: return "task2";
    case Task::task3: return "task3";
    case Task::custom: return "custom";
  }
  return "custom";
}

inline Task parse_task(std::string_view s) {
  if (s == "task1") return Task::task1;
  if (s == "task2") return Task::task2;
  if (s == "task3") return Task::task3;
  if (s == "custom") return Task::custom;
  throw ConfigError("unknown task '" + std::string(s) + "' (expected task1, task2, task3 or custom)");
}

// Short label used in depth-search tables ("Task 2").
inline std::string task_label(Task t) {
  switch (t) {
    case Task::task1: return "Task 1";
    case Task::task2: return "Task 2";
    case Task::task3: return "Task 3";
    case Task::custom: return "Custom";
  }
  return "Custom";
}

// Descriptive name used in benchmark reports.
inline std::string task_title(Task t) {
  switch (t) {
    case Task::task1: return "Android Malware Classification";
    case Task::task2: return "Incident Detection";
    case Task::task3: return "Fraud Detection";
    case Task::custom: return "Custom";
  }
  return "Custom";
}

struct DatasetSchema {
  Task task = Task::custom;
  std::size_t n_features = 0;
  std::size_t n_classes = 2;
  std::size_t total = 0;  // declared sizes; 0 means undeclared
  std::size_t train = 0;
  std::size_t test = 0;

  static DatasetSchema for_task(Task t) {
    switch (t) {
      case Task::task1: return {t, 4896, 2, 61730, 30897, 30833};
      case Task::task2: return {t, 9, 2, 100000, 70000, 30000};
      case Task::task3: return {t, 12, 3, 100000, 70000, 30000};
      case Task::custom: break;
    }
    return {};
  }
};

struct Dataset {
  Matrix x;
  std::vector<int> y;
  DatasetSchema schema;

  std::size_t size() const noexcept { return y.size(); }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(schema.n_classes, 0);
    for (int label : y) ++counts[static_cast<std::size_t>(label)];
    return counts;
  }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.x == b.x && a.y == b.y && a.schema.n_features == b.schema.n_features &&
           a.schema.n_classes == b.schema.n_classes;
  }
};

inline void validate(const Dataset& ds) {
  if (ds.x.rows() != ds.y.size()) {
    throw DataError("dataset has " + std::to_string(ds.x.rows()) + " feature rows but " +
                    std::to_string(ds.y.size()) + " labels");
  }
  for (std::size_t i = 0; i < ds.y.size(); ++i) {
    if (ds.y[i] < 0 || static_cast<std::size_t>(ds.y[i]) >= ds.schema.n_classes) {
      throw DataError("sample " + std::to_string(i) + " has label " + std::to_string(ds.y[i]) +
                      " outside [0, " + std::to_string(ds.schema.n_classes) + ")");
    }
  }
  if (!all_finite(ds.x)) throw DataError("dataset contains non-finite features");
}

inline Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.schema = ds.schema;
  out.x = Matrix(indices.size(), ds.x.cols());
  out.y.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = ds.x.row(indices[i]);
    std::copy(src.begin(), src.end(), out.x.row(i).begin());
    out.y.push_back(ds.y[indices[i]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequence encoding

enum class SequenceMode { per_feature, single_step };

inline std::string to_string(SequenceMode m) {
  return m == SequenceMode::per_feature ? "per-feature" : "single-step";
}

inline SequenceMode parse_sequence_mode(std::string_view s) {
  if (s == "per-feature") return SequenceMode::per_feature;
  if (s == "single-step") return SequenceMode::single_step;
  throw ConfigError("unknown sequence mode '" + std::string(s) + "'");
}

inline std::size_t sequence_length(SequenceMode mode, std::size_t features) {
  return mode == SequenceMode::per_feature ? features : 1;
}
inline std::size_t step_width(SequenceMode mode, std::size_t features) {
  return mode == SequenceMode::per_feature ? 1 : features;
}

// Batched form: a B x F batch becomes T matrices of B x step_width.
inline std::vector<Matrix> encode_sequence(const Matrix& batch, SequenceMode mode) {
  if (batch.cols() == 0) throw ArgumentError("encode_sequence: rows need at least one feature");
  if (mode == SequenceMode::single_step) return {batch};
  std::vector<Matrix> steps(batch.cols(), Matrix(batch.rows(), 1));
  for (std::size_t r = 0; r < batch.rows(); ++r)
    for (std::size_t c = 0; c < batch.cols(); ++c) steps[c](r, 0) = batch(r, c);
  return steps;
}

// Stacked form used by the recurrent kernels: block t of the (T*B) x step
// result holds step t of every row.
inline Matrix encode_stacked(const Matrix& batch, SequenceMode mode) {
  if (batch.cols() == 0) throw ArgumentError("encode_sequence: rows need at least one feature");
  if (mode == SequenceMode::single_step) return batch;
  const std::size_t rows = batch.rows();
  Matrix out(batch.cols() * rows, 1);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < batch.cols(); ++c) out(c * rows + r, 0) = batch(r, c);
  return out;
}

inline std::vector<std::vector<double>> encode_sequence(std::span<const double> row,
                                                        SequenceMode mode) {
  if (row.empty()) throw ArgumentError("encode_sequence: rows need at least one feature");
  if (mode == SequenceMode::single_step) return {std::vector<double>(row.begin(), row.end())};
  std::vector<std::vector<double>> steps;
  steps.reserve(row.size());
  for (double v : row) steps.push_back({v});
  return steps;
}

// ---------------------------------------------------------------------------
// CSV: F feature columns then an integer label, comma separated, LF endings,
// no quoting. Floats are written in shortest round-trip form.

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<int> parse_int(std::string_view s) {
  s = trim(s);
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

}  // namespace detail

inline void write_csv(std::ostream& out, const Dataset& ds) {
  for (std::size_t c = 0; c < ds.x.cols(); ++c) out << 'f' << c << ',';
  out << "label\n";
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (double v : ds.x.row(r)) out << format_double(v) << ',';
    out << ds.y[r] << '\n';
  }
}

inline void save_csv(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_csv(out, ds);
  if (!out) throw DataError("failed writing '" + path + "'");
}

// Parses CSV text. A header is recognised by a non-numeric first cell on the
// first line. Row numbers in errors are 1-based file line numbers.
inline Dataset read_csv(std::istream& in, const DatasetSchema& schema,
                        std::optional<std::size_t> expected_rows = std::nullopt,
                        const std::string& source = "<stream>") {
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t arity = schema.n_features;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    auto fields = detail::split_fields(view);
    if (first) {
      first = false;
      if (!detail::parse_double(fields.front())) continue;
    }
    if (arity == 0) arity = fields.size() - 1;
    if (fields.size() != arity + 1) {
      throw DataError(source + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " columns, expected " +
                      std::to_string(arity + 1) + " (" + std::to_string(arity) +
                      " features + label)");
    }
    for (std::size_t c = 0; c < arity; ++c) {
      auto v = detail::parse_double(fields[c]);
      if (!v || !std::isfinite(*v)) {
        throw DataError(source + ": row " + std::to_string(line_no) + ", column " +
                        std::to_string(c + 1) + ": '" + std::string(fields[c]) +
                        "' is not a finite number");
      }
      values.push_back(*v);
    }
    auto label = detail::parse_int(fields.back());
    if (!label) {
      throw DataError(source + ": row " + std::to_string(line_no) + ": label '" +
                      std::string(fields.back()) + "' is not an integer");
    }
    if (*label < 0 || static_cast<std::size_t>(*label) >= schema.n_classes) {
      throw DataError(source + ": row " + std::to_string(line_no) + ": label " +
                      std::to_string(*label) + " outside [0, " +
                      std::to_string(schema.n_classes) + ")");
    }
    labels.push_back(*label);
  }
  if (expected_rows && labels.size() != *expected_rows) {
    throw DataError(source + ": " + std::to_string(labels.size()) + " rows, schema declares " +
                    std::to_string(*expected_rows));
  }
  Dataset ds;
  ds.schema = schema;
  ds.schema.n_features = arity;
  ds.x = Matrix(labels.size(), arity, std::move(values));
  ds.y = std::move(labels);
  return ds;
}

inline Dataset load_csv(const std::string& path, const DatasetSchema& schema,
                        std::optional<std::size_t> expected_rows = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, schema, expected_rows, path);
}

// ---------------------------------------------------------------------------
// Rule-based correlated uniform tabular data.

enum class Comparison { less, less_equal, greater, greater_equal };

inline std::string to_string(Comparison c) {
  switch (c) {
    case Comparison::less: return "<";
    case Comparison::less_equal: return "<=";
    case Comparison::greater: return ">";
    case Comparison::greater_equal: return ">=";
  }
  return "<";
}

inline Comparison parse_comparison(std::string_view s) {
  if (s == "<") return Comparison::less;
  if (s == "<=") return Comparison::less_equal;
  if (s == ">") return Comparison::greater;
  if (s == ">=") return Comparison::greater_equal;
  throw ConfigError("unknown comparison '" + std::string(s) + "'");
}

struct Predicate {
  std::size_t feature = 0;
  Comparison op = Comparison::greater;
  double threshold = 0.5;

  bool holds(std::span<const double> row) const {
    const double v = row[feature];
    switch (op) {
      case Comparison::less: return v < threshold;
      case Comparison::less_equal: return v <= threshold;
      case Comparison::greater: return v > threshold;
      case Comparison::greater_equal: return v >= threshold;
    }
    return false;
  }
};

// Conjunction of predicates; an empty conjunction always matches.
struct Rule {
  std::vector<Predicate> when;
  int label = 0;
};

struct HcrudSpec {
  std::size_t n_samples = 1000;
  std::size_t n_features = 12;
  std::size_t n_classes = 3;
  double correlation = 0.6;
  std::vector<std::size_t> correlated_group;
  std::vector<Rule> rules;
  double label_noise = 0.0;
  std::uint64_t seed = 0;
  Task task = Task::custom;
};

// Label of the first matching rule.
inline int apply_rules(const std::vector<Rule>& rules, std::span<const double> row) {
  for (const Rule& rule : rules) {
    if (std::all_of(rule.when.begin(), rule.when.end(),
                    [&](const Predicate& p) { return p.holds(row); })) {
      return rule.label;
    }
  }
  throw ConfigError("no rule matched; the rule list needs a final catch-all");
}

inline void validate(const HcrudSpec& spec) {
  if (spec.rules.empty()) throw ConfigError("hcrud: rule list is empty");
  if (!spec.rules.back().when.empty()) {
    throw ConfigError("hcrud: the last rule must be a catch-all with no conditions");
  }
  if (spec.n_features == 0) throw ConfigError("hcrud: n_features must be positive");
  if (spec.n_classes < 2) throw ConfigError("hcrud: n_classes must be at least 2");
  if (!(spec.correlation >= 0.0 && spec.correlation < 1.0)) {
    throw ConfigError("hcrud: correlation must lie in [0, 1)");
  }
  if (!(spec.label_noise >= 0.0 && spec.label_noise < 0.5)) {
    throw ConfigError("hcrud: label_noise must lie in [0, 0.5)");
  }
  for (std::size_t f : spec.correlated_group) {
    if (f >= spec.n_features) {
      throw ConfigError("hcrud: correlated feature " + std::to_string(f) + " out of range");
    }
  }
  for (std::size_t i = 0; i < spec.rules.size(); ++i) {
    const Rule& rule = spec.rules[i];
    if (rule.label < 0 || static_cast<std::size_t>(rule.label) >= spec.n_classes) {
      throw ConfigError("hcrud: rule " + std::to_string(i) + " assigns class " +
                        std::to_string(rule.label) + " outside [0, " +
                        std::to_string(spec.n_classes) + ")");
    }
    for (const Predicate& p : rule.when) {
      if (p.feature >= spec.n_features) {
        throw ConfigError("hcrud: rule " + std::to_string(i) + " tests feature " +
                          std::to_string(p.feature) + " of " + std::to_string(spec.n_features));
      }
    }
  }
}

// Features: u ~ U(0,1); members of the correlated group are mixed toward the
// group mean, x = (1 - rho) u + rho mean(u_group). Label: first matching rule,
// then with probability label_noise replaced by a uniformly chosen other class.
inline Dataset hcrud_generate(const HcrudSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  Dataset ds;
  ds.schema = {spec.task, spec.n_features, spec.n_classes, 0, 0, 0};
  ds.x = Matrix(spec.n_samples, spec.n_features);
  ds.y.resize(spec.n_samples);
  const double rho = spec.correlation;
  const auto& group = spec.correlated_group;
  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    auto row = ds.x.row(i);
    for (double& v : row) v = rng.uniform();
    if (!group.empty() && rho > 0.0) {
      double mean = 0.0;
      for (std::size_t f : group) mean += row[f];
      mean /= static_cast<double>(group.size());
      for (std::size_t f : group) row[f] = (1.0 - rho) * row[f] + rho * mean;
    }
    int label = apply_rules(spec.rules, row);
    if (rng.uniform() < spec.label_noise) {
      int other = static_cast<int>(rng.below(spec.n_classes - 1));
      if (other >= label) ++other;
      label = other;
    }
    ds.y[i] = label;
  }
  return ds;
}

// Built-in generator settings for the incident (task2) and fraud (task3)
// schemas. Columns are abstract; the rules mix single-threshold and
// two-feature conjunctions so a linear model cannot express them exactly.
inline HcrudSpec default_hcrud_spec(Task task) {
  HcrudSpec spec;
  spec.task = task;
  using C = Comparison;
  if (task == Task::task2) {
    spec.n_samples = 100000;
    spec.n_features = 9;
    spec.n_classes = 2;
    spec.correlation = 0.6;
    spec.correlated_group = {0, 1, 2};
    spec.label_noise = 0.01;
    spec.rules = {
        {{{6, C::greater, 0.75}}, 1},
        {{{1, C::greater, 0.7}, {5, C::greater, 0.6}}, 1},
        {{}, 0},
    };
    return spec;
  }
  if (task == Task::task3) {
    spec.n_samples = 100000;
    spec.n_features = 12;
    spec.n_classes = 3;
    spec.correlation = 0.6;
    spec.correlated_group = {0, 1, 2, 3};
    spec.label_noise = 0.05;
    spec.rules = {
        // large amount together with high velocity
        {{{0, C::greater, 0.65}, {5, C::greater, 0.6}}, 2},
        // unusual hour with a new device
        {{{8, C::greater, 0.75}, {10, C::less, 0.5}}, 1},
        {{{3, C::less, 0.3}}, 1},
        {{}, 0},
    };
    return spec;
  }
  throw ConfigError("no built-in generator for " + to_string(task));
}

// Sparse binary API-usage indicators. Labels come from a hidden positive
// linear rule over a random subset of 50 columns, thresholded at the
// empirical median score so the classes are close to balanced.
inline Dataset synth_apk_features(std::size_t n_samples, std::size_t n_features = 4896,
                                  double density = 0.02, std::uint64_t seed = 0) {
  if (!(density > 0.0 && density < 1.0)) {
    throw ArgumentError("synth_apk_features: density must lie in (0, 1)");
  }
  if (n_features == 0) throw ArgumentError("synth_apk_features: need at least one feature");
  Rng rng(seed);
  Rng rule_rng = rng.split();

  std::vector<std::size_t> columns(n_features);
  for (std::size_t i = 0; i < n_features; ++i) columns[i] = i;
  shuffle(columns, rule_rng);
  columns.resize(std::min<std::size_t>(50, n_features));
  std::vector<double> weights(columns.size());
  for (double& w : weights) w = rule_rng.uniform(0.5, 1.5);

  Dataset ds;
  ds.schema = {Task::task1, n_features, 2, 0, 0, 0};
  ds.x = Matrix(n_samples, n_features);
  for (double& v : ds.x.data()) v = rng.uniform() < density ? 1.0 : 0.0;

  std::vector<double> scores(n_samples, 0.0);
  for (std::size_t i = 0; i < n_samples; ++i)
    for (std::size_t j = 0; j < columns.size(); ++j) scores[i] += weights[j] * ds.x(i, columns[j]);

  double median = 0.0;
  if (n_samples > 0) {
    std::vector<double> sorted = scores;
    auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(n_samples / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    median = *mid;
  }
  ds.y.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) ds.y[i] = scores[i] > median ? 1 : 0;
  return ds;
}

// ---------------------------------------------------------------------------
// Train/test split.

struct Split {
  Dataset train;
  Dataset test;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per-class train counts are floor or ceil of fraction * class count; the
// leftover seats go to the classes with the largest fractional parts (lowest
// class index first on ties), so the total is round(fraction * N).
inline SplitIndices split_indices(const std::vector<int>& labels, std::size_t n_classes,
                                  double train_fraction, std::uint64_t seed,
                                  bool stratified = true) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ArgumentError("split: train fraction must lie in (0, 1)");
  }
  Rng rng(seed);
  SplitIndices out;
  const std::size_t n = labels.size();
  const auto target_total = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));

  if (!stratified) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(order, rng);
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target_total));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(target_total), order.end());
  } else {
    std::vector<std::vector<std::size_t>> by_class(n_classes);
    for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);
    std::vector<std::size_t> take(n_classes, 0);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      const std::size_t count = by_class[c].size();
      if (count == 0) continue;
      if (count < 2) {
        throw DataError("split: class " + std::to_string(c) + " has " + std::to_string(count) +
                        " sample; stratification needs at least 2");
      }
      const double exact = train_fraction * static_cast<double>(count);
      take[c] = static_cast<std::size_t>(std::floor(exact));
      assigned += take[c];
      remainders.emplace_back(exact - std::floor(exact), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < target_total && i < remainders.size(); ++i, ++assigned) {
      ++take[remainders[i].second];
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      auto& members = by_class[c];
      shuffle(members, rng);
      out.train.insert(out.train.end(), members.begin(),
                       members.begin() + static_cast<std::ptrdiff_t>(take[c]));
      out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(take[c]),
                      members.end());
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline Split split(const Dataset& ds, double train_fraction = 0.7, std::uint64_t seed = 0,
                   bool stratified = true) {
  auto idx = split_indices(ds.y, ds.schema.n_classes, train_fraction, seed, stratified);
  return {subset(ds, idx.train), subset(ds, idx.test)};
}

}  // namespace rnnsec
