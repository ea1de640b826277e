#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "rnnsec/report.hpp"
#include "rnnsec/search.hpp"
#include "test_util.hpp"

namespace rnnsec {
namespace {

SearchSpace quick_space() {
  SearchSpace s;
  s.trials = 3;
  s.units_epochs = 2;
  s.lr_epochs = 2;
  s.depth_epochs = 2;
  s.folds = 2;
  return s;
}

TopologyConfig tiny() {
  TopologyConfig t;
  t.num_recurrent_layers = 1;
  t.hidden_units = 4;
  return t;
}

// Accuracy as a pure function of the cell, so tests can predict it.
double seeded_accuracy(const TopologyConfig&, const Dataset&, const TrainConfig& c) {
  return static_cast<double>(c.seed % 1000) / 1000.0;
}

TEST(Search, RowCountIsCandidatesTimesTrials) {
  Dataset ds = test::blobs(20, 3, 1);
  SearchSpace s = quick_space();
  s.units = {4, 8, 16};
  SearchResult r = search_units(s, ds, tiny(), TrainConfig{}, {1, seeded_accuracy});
  EXPECT_EQ(r.rows.size(), 9u);
  for (const auto& row : r.rows) {
    EXPECT_GE(row.accuracy, 0.0);
    EXPECT_LE(row.accuracy, 1.0);
  }
}

TEST(Search, SingleCandidateIsSelected) {
  Dataset ds = test::blobs(20, 3, 1);
  SearchSpace s = quick_space();
  s.units = {8};
  EXPECT_EQ(search_units(s, ds, tiny(), TrainConfig{}, {1, seeded_accuracy}).selected_value(), 8.0);
  s.learning_rates = {0.01};
  EXPECT_EQ(search_lr(s, ds, tiny(), TrainConfig{}, {1, seeded_accuracy}).selected_value(), 0.01);
  s.depths = {1};
  EXPECT_EQ(search_depth(s, ds, tiny(), TrainConfig{}, {1, seeded_accuracy}).selected_value(), 1.0);
}

TEST(Search, RealCrossValidationRerunIsIdentical) {
  Dataset ds = test::blobs(24, 3, 2);
  SearchSpace s = quick_space();
  s.depths = {1, 2};
  s.trials = 2;
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.seed = 5;
  SearchResult a = search_depth(s, ds, tiny(), cfg);
  SearchResult b = search_depth(s, ds, tiny(), cfg, {2, {}});
  std::ostringstream ca, cb;
  write_search_csv(ca, a);
  write_search_csv(cb, b);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(search_text(a), search_text(b));
}

TEST(Search, TrialSeedsDifferAcrossCells) {
  Dataset ds = test::blobs(20, 3, 1);
  SearchSpace s = quick_space();
  s.units = {4, 8};
  SearchResult r = search_units(s, ds, tiny(), TrainConfig{}, {1, seeded_accuracy});
  std::set<double> seen;
  for (const auto& row : r.rows) seen.insert(row.accuracy);
  EXPECT_GT(seen.size(), 3u);
}

TEST(Search, DivergentLearningRateScoresZero) {
  Dataset ds = test::blobs(20, 3, 1);
  SearchSpace s = quick_space();
  s.learning_rates = {0.01, 0.5};
  auto evaluator = [](const TopologyConfig&, const Dataset&, const TrainConfig& c) -> double {
    if (c.learning_rate > 0.4) throw TrainingError("training diverged: non-finite loss at epoch 1, batch 1");
    return 0.75;
  };
  SearchResult r = search_lr(s, ds, tiny(), TrainConfig{}, {1, evaluator});
  ASSERT_EQ(r.rows.size(), 6u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.diverged, row.candidate == 1);
    EXPECT_EQ(row.accuracy, row.candidate == 1 ? 0.0 : 0.75);
  }
  EXPECT_EQ(r.selected_value(), 0.01);
}

TEST(Search, UnitsStageReportsCandidateAndTrialOnFailure) {
  Dataset ds = test::blobs(20, 3, 1);
  SearchSpace s = quick_space();
  s.units = {4, 8};
  auto evaluator = [](const TopologyConfig& t, const Dataset&, const TrainConfig&) -> double {
    if (t.hidden_units == 8) throw TrainingError("boom");
    return 0.5;
  };
  try {
    search_units(s, ds, tiny(), TrainConfig{}, {1, evaluator});
    FAIL();
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("candidate 8"), std::string::npos);
    EXPECT_NE(msg.find("trial 0"), std::string::npos);
  }
}

TEST(Search, SpaceValidation) {
  SearchSpace s;
  s.learning_rates = {0.6};
  EXPECT_THROW(validate(s), ConfigError);
  s = SearchSpace{};
  s.trials = 0;
  EXPECT_THROW(validate(s), ConfigError);
  s = SearchSpace{};
  s.depths = {7};
  EXPECT_THROW(validate(s), ConfigError);
}

SearchResult manual_result(std::vector<Candidate> candidates,
                           std::vector<std::vector<double>> accuracies) {
  SearchResult r;
  r.stage = Stage::depth;
  r.task = Task::task2;
  r.candidates = std::move(candidates);
  for (std::size_t c = 0; c < accuracies.size(); ++c)
    for (std::size_t t = 0; t < accuracies[c].size(); ++t) r.rows.push_back({c, t, accuracies[c][t], false});
  r.selected = select_best(r);
  return r;
}

TEST(SelectBest, TieGoesToFewerParameters) {
  SearchResult r = manual_result({{4, 400}, {2, 200}}, {{0.8, 0.8}, {0.8, 0.8}});
  EXPECT_EQ(r.selected_value(), 2.0);
  SearchResult same = manual_result({{2, 200}, {4, 400}}, {{0.8}, {0.8}});
  EXPECT_EQ(same.selected_value(), 2.0);
}

TEST(SelectBest, DominatingCandidateWinsInAnyOrder) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Candidate> cands;
    std::vector<std::vector<double>> acc;
    const std::size_t n = 2 + rng.below(5), winner = rng.below(n);
    for (std::size_t c = 0; c < n; ++c) {
      cands.push_back({static_cast<double>(c + 1), 100 * (n - c)});
      acc.push_back({c == winner ? 0.99 : rng.uniform(0.0, 0.9)});
    }
    EXPECT_EQ(manual_result(cands, acc).selected, winner);
  }
}

TEST(SelectBest, InvariantUnderRowPermutation) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(4);
    std::vector<Candidate> cands;
    std::vector<std::vector<double>> acc;
    for (std::size_t c = 0; c < n; ++c) {
      cands.push_back({static_cast<double>(c + 1), 10 * (1 + rng.below(3))});
      std::vector<double> a;
      for (int t = 0; t < 3; ++t) a.push_back(static_cast<double>(rng.below(5)) / 4.0);
      acc.push_back(a);
    }
    SearchResult r = manual_result(cands, acc);
    SearchResult shuffled = r;
    shuffle(shuffled.rows, rng);
    EXPECT_EQ(select_best(shuffled), r.selected);
    EXPECT_EQ(candidate_means(shuffled), candidate_means(r));
  }
}

TEST(SelectBest, MeanOverTrialsIsArithmeticMean) {
  SearchResult r = manual_result({{3, 10}}, {{0.7, 0.8, 0.9}});
  EXPECT_DOUBLE_EQ(candidate_means(r)[0], (0.7 + 0.8 + 0.9) / 3.0);
}

TEST(SearchReport, DepthTableRows) {
  SearchResult r = manual_result({{3, 10}}, {{0.827, 0.827, 0.827}});
  const std::string text = search_text(r);
  EXPECT_NE(text.find("\nRNN 3 layer | Task 2 | 0.827\n"), std::string::npos) << text;
}

}  // namespace
}  // namespace rnnsec
