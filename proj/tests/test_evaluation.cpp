#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "rnnsec/evaluation.hpp"
#include "test_util.hpp"

namespace rnnsec {
namespace {

TEST(Confusion, PerfectPredictionsAreDiagonal) {
  std::vector<int> y{0, 1, 2, 2, 1};
  ConfusionMatrix cm = confusion(y, y, 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t p = 0; p < 3; ++p)
      if (a != p) EXPECT_EQ(cm.at(a, p), 0u);
  EXPECT_EQ(cm.trace(), 5u);
}

TEST(Confusion, HandTally) {
  std::vector<int> pred{1, 0, 1}, actual{1, 1, 0};
  ConfusionMatrix cm = confusion(pred, actual, 2);
  EXPECT_EQ(cm.at(0, 0), 0u);
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.at(1, 0), 1u);
  EXPECT_EQ(cm.at(1, 1), 1u);
}

TEST(Confusion, EmptyInputGivesZeroMatrix) {
  std::vector<int> none;
  ConfusionMatrix cm = confusion(none, none, 3);
  EXPECT_EQ(cm.total(), 0u);
  EXPECT_EQ(cm.counts.size(), 9u);
}

TEST(Confusion, OutOfRangeLabelNamesSample) {
  std::vector<int> pred{0, 3}, actual{0, 1};
  try {
    confusion(pred, actual, 2);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("sample 1"), std::string::npos);
  }
}

TEST(Metrics, DiagonalIsPerfect) {
  std::vector<int> y{0, 1, 2, 0};
  MetricsReport m = metrics(confusion(y, y, 3));
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f_score, 1.0);
}

TEST(Metrics, BinaryHandComputed) {
  ConfusionMatrix cm(2);
  cm.at(1, 1) = 8;  // TP
  cm.at(0, 1) = 2;  // FP
  cm.at(1, 0) = 4;  // FN
  cm.at(0, 0) = 6;  // TN
  MetricsReport m = metrics(cm);
  EXPECT_NEAR(m.accuracy, 0.7, 1e-15);
  EXPECT_NEAR(m.precision, 0.8, 1e-15);
  EXPECT_NEAR(m.recall, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.f_score, 0.7272727272727272, 1e-15);
  EXPECT_EQ(m.averaging, Averaging::positive_class);
}

TEST(Metrics, AllWrongBinaryGivesZeros) {
  std::vector<int> pred{1, 0, 1}, actual{0, 1, 0};
  MetricsReport m = metrics(confusion(pred, actual, 2));
  EXPECT_EQ(m.accuracy, 0.0);
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f_score, 0.0);
}

TEST(Metrics, MulticlassIsSupportWeighted) {
  // Classes 0,1,2 with supports 2,1,1.
  std::vector<int> actual{0, 0, 1, 2}, pred{0, 1, 1, 0};
  MetricsReport m = metrics(confusion(pred, actual, 3));
  // per class (P, R): 0 -> (1/2, 1/2), 1 -> (1/2, 1), 2 -> (0, 0)
  EXPECT_NEAR(m.precision, 0.5 * 0.5 + 0.25 * 0.5, 1e-15);
  EXPECT_NEAR(m.recall, 0.5 * 0.5 + 0.25 * 1.0, 1e-15);
  EXPECT_NEAR(m.f_score, 0.5 * 0.5 + 0.25 * (2.0 / 3.0), 1e-15);
  EXPECT_EQ(m.averaging, Averaging::weighted);
}

TEST(Metrics, BoundedOnRandomMatrices) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 2 + rng.below(4);
    const std::size_t n = 1 + rng.below(50);
    auto pred = test::random_labels(n, k, rng);
    auto actual = test::random_labels(n, k, rng);
    ConfusionMatrix cm = confusion(pred, actual, k);
    EXPECT_EQ(cm.total(), n);
    MetricsReport m = metrics(cm);
    for (double v : {m.accuracy, m.precision, m.recall, m.f_score}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-12);
    }
    EXPECT_DOUBLE_EQ(m.accuracy, static_cast<double>(cm.trace()) / static_cast<double>(n));
  }
}

TEST(Metrics, EmptyMatrixIsRejected) { EXPECT_THROW(metrics(ConfusionMatrix(2)), ArgumentError); }

// Disjoint, covering, and per-fold class counts within one of n_c / k.
void expect_valid_plan(const std::vector<int>& labels, std::size_t k, const FoldPlan& plan) {
  ASSERT_EQ(plan.assignments.size(), labels.size());
  std::vector<std::size_t> seen(labels.size(), 0);
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t i : plan.members(f)) ++seen[i];
  for (std::size_t s : seen) EXPECT_EQ(s, 1u);
  const int classes = *std::max_element(labels.begin(), labels.end()) + 1;
  for (int c = 0; c < classes; ++c) {
    const double total = static_cast<double>(std::count(labels.begin(), labels.end(), c));
    const double ideal = total / static_cast<double>(k);
    for (std::size_t f = 0; f < k; ++f) {
      double in_fold = 0;
      for (std::size_t i : plan.members(f)) in_fold += labels[i] == c;
      EXPECT_GE(in_fold, std::floor(ideal) - 1e-9 - 0.0);
      EXPECT_LE(in_fold, std::ceil(ideal) + 1e-9);
      EXPECT_LE(std::abs(in_fold - ideal), 1.0);
    }
  }
}

TEST(StratifiedKFold, ExactDivision) {
  std::vector<int> labels(100);
  for (std::size_t i = 0; i < 100; ++i) labels[i] = i < 50 ? 0 : 1;
  FoldPlan plan = stratified_kfold(labels, 10, 3);
  for (std::size_t f = 0; f < 10; ++f) {
    std::size_t ones = 0;
    auto members = plan.members(f);
    for (std::size_t i : members) ones += labels[i];
    EXPECT_EQ(members.size(), 10u);
    EXPECT_EQ(ones, 5u);
  }
}

TEST(StratifiedKFold, SameSeedSamePlan) {
  Rng rng(2);
  auto labels = test::random_labels(77, 3, rng);
  EXPECT_EQ(stratified_kfold(labels, 10, 5), stratified_kfold(labels, 10, 5));
}

TEST(StratifiedKFold, UnevenClasses) {
  std::vector<int> labels(103);
  for (std::size_t i = 0; i < 103; ++i) labels[i] = i < 70 ? 0 : 1;
  expect_valid_plan(labels, 10, stratified_kfold(labels, 10, 9));
}

TEST(StratifiedKFold, RandomLabelVectors) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 20 + rng.below(300);
    auto labels = test::random_labels(n, 2 + rng.below(3), rng);
    expect_valid_plan(labels, 10, stratified_kfold(labels, 10, rng.next()));
  }
}

TEST(StratifiedKFold, RejectsTooFewFolds) {
  std::vector<int> labels{0, 1};
  EXPECT_THROW(stratified_kfold(labels, 1, 0), ArgumentError);
}

TopologyConfig tiny_topology() {
  TopologyConfig t;
  t.num_recurrent_layers = 1;
  t.hidden_units = 4;
  return t;
}

TEST(CrossValidate, ConstantInputPredictsMajority) {
  // Identical feature rows make every prediction identical; training moves
  // the output toward the 90% class.
  Dataset ds;
  ds.schema.n_features = 3;
  ds.schema.n_classes = 2;
  ds.x = Matrix(100, 3);
  for (std::size_t i = 0; i < 100; ++i) ds.y.push_back(i < 90 ? 0 : 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 4;
  CrossValidationResult cv = cross_validate(tiny_topology(), ds, cfg, 10);
  EXPECT_NEAR(cv.mean_accuracy, 0.9, 1e-12);
}

TEST(CrossValidate, TwoFoldsOnFourSamples) {
  Dataset ds = test::blobs(4, 2, 5);
  TrainConfig cfg;
  cfg.epochs = 2;
  CrossValidationResult cv = cross_validate(tiny_topology(), ds, cfg, 2);
  EXPECT_EQ(cv.folds.size(), 2u);
}

TEST(CrossValidate, DeterministicAndJobIndependent) {
  Dataset ds = test::blobs(60, 3, 6);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.seed = 12;
  CrossValidationResult a = cross_validate(tiny_topology(), ds, cfg, 5, 1);
  CrossValidationResult b = cross_validate(tiny_topology(), ds, cfg, 5, 1);
  CrossValidationResult c = cross_validate(tiny_topology(), ds, cfg, 5, 3);
  EXPECT_EQ(a.folds, b.folds);
  EXPECT_EQ(a.folds, c.folds);
  EXPECT_EQ(a.mean_accuracy, c.mean_accuracy);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  for (const auto& f : a.folds) {
    lo = std::min(lo, f.accuracy);
    hi = std::max(hi, f.accuracy);
    sum += f.accuracy;
  }
  EXPECT_GE(a.mean_accuracy, lo);
  EXPECT_LE(a.mean_accuracy, hi);
  EXPECT_DOUBLE_EQ(a.mean_accuracy, sum / 5.0);
}

TEST(CrossValidate, EmptyFoldNamesTheFold) {
  Dataset ds = test::blobs(4, 2, 7);
  TrainConfig cfg;
  cfg.epochs = 1;
  try {
    cross_validate(tiny_topology(), ds, cfg, 6);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("fold 4"), std::string::npos);
  }
}

}  // namespace
}  // namespace rnnsec
