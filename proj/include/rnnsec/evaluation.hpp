#pragma once

// Confusion matrices, the four report metrics, stratified k-fold plans and
// cross-validation of a topology.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rnnsec/dataset.hpp"
#include "rnnsec/error.hpp"
#include "rnnsec/model.hpp"
#include "rnnsec/parallel.hpp"
#include "rnnsec/tensor.hpp"

namespace rnnsec {

struct ConfusionMatrix {
  std::size_t k = 0;
  std::vector<std::size_t> counts;  // row-major, counts[actual * k + predicted]

  explicit ConfusionMatrix(std::size_t classes = 0) : k(classes), counts(classes * classes, 0) {}

  std::size_t& at(std::size_t actual, std::size_t predicted) { return counts[actual * k + predicted]; }
  std::size_t at(std::size_t actual, std::size_t predicted) const {
    return counts[actual * k + predicted];
  }
  std::size_t total() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
  std::size_t trace() const {
    std::size_t t = 0;
    for (std::size_t i = 0; i < k; ++i) t += at(i, i);
    return t;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> actual,
                                 std::size_t k) {
  if (predicted.size() != actual.size()) {
    throw ArgumentError("confusion: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(actual.size()) + " labels");
  }
  ConfusionMatrix cm(k);
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const int a = actual[i];
    const int p = predicted[i];
    if (a < 0 || p < 0 || static_cast<std::size_t>(a) >= k || static_cast<std::size_t>(p) >= k) {
      throw DataError("confusion: sample " + std::to_string(i) + " has label pair (actual " +
                      std::to_string(a) + ", predicted " + std::to_string(p) + ") outside [0, " +
                      std::to_string(k) + ")");
    }
    ++cm.at(static_cast<std::size_t>(a), static_cast<std::size_t>(p));
  }
  return cm;
}

enum class Averaging { positive_class, weighted };

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  Averaging averaging = Averaging::positive_class;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

inline double f_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

// Binary matrices report the positive class (label 1); larger ones report
// support-weighted per-class averages. Empty denominators count as 0.
inline MetricsReport metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw ArgumentError("metrics: confusion matrix is empty");
  MetricsReport r;
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(total);

  auto per_class = [&](std::size_t c) {
    std::size_t tp = cm.at(c, c), predicted = 0, actual = 0;
    for (std::size_t j = 0; j < cm.k; ++j) {
      predicted += cm.at(j, c);
      actual += cm.at(c, j);
    }
    const double p = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    const double rc = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    return std::tuple{p, rc, f_score(p, rc), actual};
  };

  if (cm.k == 2) {
    auto [p, rc, f, support] = per_class(1);
    (void)support;
    r.precision = p;
    r.recall = rc;
    r.f_score = f;
    r.averaging = Averaging::positive_class;
    return r;
  }
  r.averaging = Averaging::weighted;
  for (std::size_t c = 0; c < cm.k; ++c) {
    auto [p, rc, f, support] = per_class(c);
    const double w = static_cast<double>(support) / static_cast<double>(total);
    r.precision += w * p;
    r.recall += w * rc;
    r.f_score += w * f;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Stratified k-fold

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;  // fold index per sample

  std::vector<std::size_t> members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] == fold) out.push_back(i);
    return out;
  }
  std::vector<std::size_t> complement(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
      if (assignments[i] != fold) out.push_back(i);
    return out;
  }

  friend bool operator==(const FoldPlan&, const FoldPlan&) = default;
};

// Per class: seeded shuffle, then deal round-robin. The deal for each class
// starts where the previous class stopped so small classes do not all pile
// into fold 0.
inline FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("stratified_kfold: k must be at least 2");
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw DataError("stratified_kfold: negative label");
    max_label = std::max(max_label, l);
  }
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);

  Rng rng(seed);
  FoldPlan plan{k, std::vector<std::size_t>(labels.size(), 0)};
  std::size_t cursor = 0;
  for (auto& members : by_class) {
    shuffle(members, rng);
    for (std::size_t idx : members) {
      plan.assignments[idx] = cursor;
      cursor = (cursor + 1) % k;
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CrossValidationResult {
  double mean_accuracy = 0.0;
  std::vector<MetricsReport> folds;
};

inline MetricsReport evaluate_model(const Model& model, const Dataset& test) {
  Prediction p = predict_batched(model, test.x);
  return metrics(confusion(p.labels, test.y, model.num_classes));
}

inline std::uint64_t fold_seed(std::uint64_t base, std::size_t fold) {
  return derive_seed(base, {static_cast<std::uint64_t>(fold)});
}

// Trains a fresh model per fold on the other k-1 folds. Folds may run on up
// to `jobs` threads; results are ordered by fold index.
inline CrossValidationResult cross_validate(const TopologyConfig& topology, const Dataset& data,
                                            const TrainConfig& cfg, std::size_t k = 10,
                                            std::size_t jobs = 1) {
  validate(topology);
  validate(cfg);
  validate(data);
  const FoldPlan plan = stratified_kfold(data.y, k, cfg.seed);

  auto run_fold = [&](std::size_t fold) -> MetricsReport {
    try {
      const std::uint64_t seed = fold_seed(cfg.seed, fold);
      Dataset train_part = subset(data, plan.complement(fold));
      Dataset test_part = subset(data, plan.members(fold));
      if (test_part.size() == 0) {
        throw DataError("fold is empty (" + std::to_string(data.size()) + " samples for " +
                        std::to_string(k) + " folds)");
      }
      Model model = build_model(topology, data.x.cols(), data.schema.n_classes, seed);
      TrainConfig fold_cfg = cfg;
      fold_cfg.seed = seed;
      train(model, train_part, fold_cfg);
      return evaluate_model(model, test_part);
    } catch (const TrainingError& e) {
      throw TrainingError("fold " + std::to_string(fold) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("fold " + std::to_string(fold) + ": " + e.what());
    }
  };

  CrossValidationResult out;
  out.folds = parallel_map(k, jobs, run_fold);
  double sum = 0.0;
  for (const auto& r : out.folds) sum += r.accuracy;
  out.mean_accuracy = sum / static_cast<double>(k);
  return out;
}

}  // namespace rnnsec
