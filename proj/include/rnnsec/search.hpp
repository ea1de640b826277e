#pragma once

// Grid search over hidden units, learning rate and recurrent depth, each
// candidate scored by repeated k-fold cross-validation.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rnnsec/dataset.hpp"
#include "rnnsec/error.hpp"
#include "rnnsec/evaluation.hpp"
#include "rnnsec/model.hpp"
#include "rnnsec/parallel.hpp"

namespace rnnsec {

enum class Stage { units, lr, depth };

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::units: return "units";
    case Stage::lr: return "lr";
    case Stage::depth: return "depth";
  }
  return "units";
}

inline Stage parse_stage(std::string_view s) {
  if (s == "units") return Stage::units;
  if (s == "lr") return Stage::lr;
  if (s == "depth") return Stage::depth;
  throw ConfigError("unknown search stage '" + std::string(s) + "' (expected units, lr or depth)");
}

struct SearchSpace {
  std::vector<std::size_t> units{64, 128, 256, 512, 768};
  std::vector<double> learning_rates{0.01, 0.035, 0.045, 0.05, 0.1, 0.25, 0.5};
  std::vector<std::size_t> depths{1, 2, 3, 4, 5, 6};
  std::size_t trials = 3;
  std::size_t units_epochs = 400;
  std::size_t lr_epochs = 700;
  std::size_t depth_epochs = 700;
  std::size_t folds = 10;
};

inline void validate(const SearchSpace& s) {
  if (s.trials < 1) throw ConfigError("search: trials must be at least 1");
  for (double lr : s.learning_rates) {
    if (!(lr >= 0.01 && lr <= 0.5)) {
      throw ConfigError("search: learning rate " + format_double(lr) +
                        " outside [0.01, 0.5]");
    }
  }
  for (std::size_t d : s.depths) {
    if (d < 1 || d > kMaxRecurrentLayers) {
      throw ConfigError("search: depth " + std::to_string(d) + " outside 1.." +
                        std::to_string(kMaxRecurrentLayers));
    }
  }
  for (std::size_t u : s.units)
    if (u < 1) throw ConfigError("search: hidden units must be positive");
  if (s.folds < 2) throw ConfigError("search: folds must be at least 2");
}

struct Candidate {
  double value = 0.0;
  std::size_t parameter_count = 0;
};

struct SearchRow {
  std::size_t candidate = 0;  // index into SearchResult::candidates
  std::size_t trial = 0;
  double accuracy = 0.0;
  bool diverged = false;
};

struct SearchResult {
  Stage stage = Stage::units;
  Task task = Task::custom;
  std::vector<Candidate> candidates;
  std::vector<SearchRow> rows;
  std::size_t selected = 0;  // candidate index

  double selected_value() const { return candidates.at(selected).value; }
};

// Scores one (topology, config) cell; the default runs k-fold CV.
using CandidateEvaluator =
    std::function<double(const TopologyConfig&, const Dataset&, const TrainConfig&)>;

struct SearchOptions {
  std::size_t jobs = 1;
  CandidateEvaluator evaluator;  // empty: cross-validation with SearchSpace::folds
};

// Mean accuracy per candidate, summed in trial order so the result does not
// depend on row order.
inline std::vector<double> candidate_means(const SearchResult& result) {
  std::vector<SearchRow> rows = result.rows;
  std::sort(rows.begin(), rows.end(), [](const SearchRow& a, const SearchRow& b) {
    return a.candidate != b.candidate ? a.candidate < b.candidate : a.trial < b.trial;
  });
  std::vector<double> sums(result.candidates.size(), 0.0);
  std::vector<std::size_t> counts(result.candidates.size(), 0);
  for (const SearchRow& row : rows) {
    sums.at(row.candidate) += row.accuracy;
    ++counts[row.candidate];
  }
  for (std::size_t c = 0; c < sums.size(); ++c)
    sums[c] = counts[c] ? sums[c] / static_cast<double>(counts[c]) : 0.0;
  return sums;
}

// Highest mean accuracy; ties go to fewer parameters, then the earlier
// candidate.
inline std::size_t select_best(const SearchResult& result) {
  if (result.rows.empty()) throw ArgumentError("select_best: no search rows");
  const std::vector<double> means = candidate_means(result);
  std::vector<bool> present(result.candidates.size(), false);
  for (const SearchRow& r : result.rows) present.at(r.candidate) = true;
  std::size_t best = result.candidates.size();
  for (std::size_t c = 0; c < result.candidates.size(); ++c) {
    if (!present[c]) continue;
    if (best == result.candidates.size()) {
      best = c;
      continue;
    }
    if (means[c] > means[best] ||
        (means[c] == means[best] &&
         result.candidates[c].parameter_count < result.candidates[best].parameter_count)) {
      best = c;
    }
  }
  return best;
}

namespace detail {

inline constexpr std::uint64_t stage_tag(Stage s) { return 0x5EA2C400ULL + static_cast<std::uint64_t>(s); }

struct Cell {
  TopologyConfig topology;
  TrainConfig cfg;
};

inline SearchResult run_stage(Stage stage, const SearchSpace& space, const Dataset& data,
                              std::vector<Candidate> candidates, std::vector<Cell> cells_per_candidate,
                              bool tolerate_divergence, const SearchOptions& opts) {
  SearchResult result;
  result.stage = stage;
  result.task = data.schema.task;
  result.candidates = std::move(candidates);

  CandidateEvaluator evaluate = opts.evaluator;
  if (!evaluate) {
    evaluate = [folds = space.folds](const TopologyConfig& t, const Dataset& d,
                                     const TrainConfig& c) {
      return cross_validate(t, d, c, folds, 1).mean_accuracy;
    };
  }

  const std::size_t n_cells = result.candidates.size() * space.trials;
  auto run_cell = [&](std::size_t cell) -> SearchRow {
    const std::size_t candidate = cell / space.trials;
    const std::size_t trial = cell % space.trials;
    Cell setup = cells_per_candidate[candidate];
    setup.cfg.seed = derive_seed(setup.cfg.seed, {stage_tag(stage), candidate, trial});
    try {
      return {candidate, trial, evaluate(setup.topology, data, setup.cfg), false};
    } catch (const TrainingError& e) {
      if (tolerate_divergence) return {candidate, trial, 0.0, true};
      throw TrainingError(to_string(stage) + " search, candidate " +
                          format_double(result.candidates[candidate].value) + ", trial " +
                          std::to_string(trial) + ": " + e.what());
    }
  };
  result.rows = parallel_map(n_cells, opts.jobs, run_cell);
  result.selected = select_best(result);
  return result;
}

}  // namespace detail

// Depth-1 networks, one candidate per hidden-unit count.
inline SearchResult search_units(const SearchSpace& space, const Dataset& data,
                                 const TopologyConfig& base_topology, const TrainConfig& base_cfg,
                                 const SearchOptions& opts = {}) {
  validate(space);
  if (space.units.empty()) throw ConfigError("search_units: empty unit list");
  std::vector<Candidate> candidates;
  std::vector<detail::Cell> cells;
  for (std::size_t units : space.units) {
    TopologyConfig t = base_topology;
    t.num_recurrent_layers = 1;
    t.hidden_units = units;
    TrainConfig c = base_cfg;
    c.epochs = space.units_epochs;
    candidates.push_back({static_cast<double>(units),
                          parameter_count(t, data.x.cols(), data.schema.n_classes)});
    cells.push_back({t, c});
  }
  return detail::run_stage(Stage::units, space, data, std::move(candidates), std::move(cells),
                           false, opts);
}

// Divergent (candidate, trial) cells score 0 and the sweep continues.
inline SearchResult search_lr(const SearchSpace& space, const Dataset& data,
                              const TopologyConfig& topology, const TrainConfig& base_cfg,
                              const SearchOptions& opts = {}) {
  validate(space);
  if (space.learning_rates.empty()) throw ConfigError("search_lr: empty learning-rate list");
  std::vector<Candidate> candidates;
  std::vector<detail::Cell> cells;
  const std::size_t params = parameter_count(topology, data.x.cols(), data.schema.n_classes);
  for (double lr : space.learning_rates) {
    TrainConfig c = base_cfg;
    c.epochs = space.lr_epochs;
    c.learning_rate = lr;
    candidates.push_back({lr, params});
    cells.push_back({topology, c});
  }
  return detail::run_stage(Stage::lr, space, data, std::move(candidates), std::move(cells), true,
                           opts);
}

inline SearchResult search_depth(const SearchSpace& space, const Dataset& data,
                                 const TopologyConfig& base_topology, const TrainConfig& base_cfg,
                                 const SearchOptions& opts = {}) {
  validate(space);
  if (space.depths.empty()) throw ConfigError("search_depth: empty depth list");
  std::vector<Candidate> candidates;
  std::vector<detail::Cell> cells;
  for (std::size_t depth : space.depths) {
    TopologyConfig t = base_topology;
    t.num_recurrent_layers = depth;
    TrainConfig c = base_cfg;
    c.epochs = space.depth_epochs;
    candidates.push_back({static_cast<double>(depth),
                          parameter_count(t, data.x.cols(), data.schema.n_classes)});
    cells.push_back({t, c});
  }
  return detail::run_stage(Stage::depth, space, data, std::move(candidates), std::move(cells),
                           true, opts);
}

}  // namespace rnnsec
