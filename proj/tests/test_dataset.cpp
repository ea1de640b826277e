#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "rnnsec/dataset.hpp"
#include "test_util.hpp"

namespace rnnsec {
namespace {

TEST(Schema, TaskDefaults) {
  DatasetSchema t1 = DatasetSchema::for_task(Task::task1);
  EXPECT_EQ(t1.n_features, 4896u);
  EXPECT_EQ(t1.n_classes, 2u);
  EXPECT_EQ(t1.total, 61730u);
  EXPECT_EQ(t1.train, 30897u);
  EXPECT_EQ(t1.test, 30833u);
  DatasetSchema t2 = DatasetSchema::for_task(Task::task2);
  EXPECT_EQ(t2.n_features, 9u);
  EXPECT_EQ(t2.n_classes, 2u);
  EXPECT_EQ(t2.train + t2.test, t2.total);
  EXPECT_EQ(t2.train, 70000u);
  DatasetSchema t3 = DatasetSchema::for_task(Task::task3);
  EXPECT_EQ(t3.n_features, 12u);
  EXPECT_EQ(t3.n_classes, 3u);
  EXPECT_EQ(t3.test, 30000u);
}

TEST(Csv, HandWrittenRoundTrip) {
  std::istringstream in("f0,f1,label\n0.5,-1.25,1\n3,0.1,0\n1e-3,2.5,1\n");
  DatasetSchema schema{Task::custom, 2, 2};
  Dataset ds = read_csv(in, schema);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.x(2, 0), 0.001);
  std::ostringstream out;
  write_csv(out, ds);
  std::istringstream again(out.str());
  EXPECT_EQ(read_csv(again, schema), ds);
}

TEST(Csv, RandomDatasetsRoundTripExactly) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset ds;
    ds.schema = {Task::custom, 1 + rng.below(6), 3};
    const std::size_t n = rng.below(30);
    ds.x = test::random_matrix(n, ds.schema.n_features, rng, -1e6, 1e6);
    ds.y = test::random_labels(n, 3, rng);
    std::ostringstream out;
    write_csv(out, ds);
    std::istringstream in(out.str());
    EXPECT_EQ(read_csv(in, ds.schema), ds);
  }
}

TEST(Csv, WrongArityNamesRow) {
  std::ostringstream text;
  text << "1,2,3,4,5,6,7,8,9,0\n";
  text << "1,2,3,4,5,6,7,8,9,10,1\n";
  std::istringstream in(text.str());
  try {
    read_csv(in, DatasetSchema::for_task(Task::task2));
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("11 columns"), std::string::npos) << msg;
  }
}

TEST(Csv, LabelOutOfRange) {
  std::istringstream in("0.1,0\n0.2,1\n0.3,2\n");
  try {
    read_csv(in, DatasetSchema{Task::custom, 1, 2});
    FAIL();
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 3"), std::string::npos);
    EXPECT_NE(msg.find("label 2"), std::string::npos);
  }
}

TEST(Csv, NonNumericCellNamesColumn) {
  std::istringstream in("0.1,0.2,0\n0.1,abc,1\n");
  try {
    read_csv(in, DatasetSchema{Task::custom, 2, 2});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("column 2"), std::string::npos);
  }
}

TEST(Csv, DeclaredRowCountIsChecked) {
  std::istringstream in("0.1,0\n0.2,1\n");
  EXPECT_THROW(read_csv(in, DatasetSchema{Task::custom, 1, 2}, 3), DataError);
}

HcrudSpec simple_spec(double rho, double noise, std::size_t n) {
  HcrudSpec s = default_hcrud_spec(Task::task3);
  s.correlation = rho;
  s.label_noise = noise;
  s.n_samples = n;
  s.seed = 17;
  return s;
}

TEST(Hcrud, NoiselessLabelsFollowRules) {
  for (Task task : {Task::task2, Task::task3}) {
    HcrudSpec s = default_hcrud_spec(task);
    s.n_samples = 5000;
    s.label_noise = 0.0;
    Dataset ds = hcrud_generate(s);
    for (std::size_t i = 0; i < ds.size(); ++i) ASSERT_EQ(apply_rules(s.rules, ds.x.row(i)), ds.y[i]);
  }
}

TEST(Hcrud, ZeroCorrelationLeavesUniformFeatures) {
  Dataset ds = hcrud_generate(simple_spec(0.0, 0.0, 20000));
  for (std::size_t c = 0; c < ds.x.cols(); ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
      ASSERT_GE(ds.x(r, c), 0.0);
      ASSERT_LT(ds.x(r, c), 1.0);
      mean += ds.x(r, c);
    }
    EXPECT_NEAR(mean / static_cast<double>(ds.size()), 0.5, 0.01);
  }
}

double pearson(const Matrix& x, std::size_t a, std::size_t b) {
  const double n = static_cast<double>(x.rows());
  double ma = 0, mb = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    ma += x(r, a);
    mb += x(r, b);
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    sab += (x(r, a) - ma) * (x(r, b) - mb);
    saa += (x(r, a) - ma) * (x(r, a) - ma);
    sbb += (x(r, b) - mb) * (x(r, b) - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

TEST(Hcrud, CorrelatedGroupIsCorrelated) {
  HcrudSpec s = simple_spec(0.8, 0.0, 10000);
  Dataset ds = hcrud_generate(s);
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.correlated_group.size(); ++i)
    for (std::size_t j = i + 1; j < s.correlated_group.size(); ++j, ++pairs)
      total += pearson(ds.x, s.correlated_group[i], s.correlated_group[j]);
  EXPECT_GE(total / static_cast<double>(pairs), 0.5);
  EXPECT_LT(std::abs(pearson(ds.x, 6, 7)), 0.05);
}

TEST(Hcrud, NoiseRateMatchesMismatchFraction) {
  for (Task task : {Task::task2, Task::task3}) {
    HcrudSpec s = default_hcrud_spec(task);
    s.n_samples = 100000;
    s.label_noise = 0.1;
    s.seed = 3;
    Dataset ds = hcrud_generate(s);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) mismatches += apply_rules(s.rules, ds.x.row(i)) != ds.y[i];
    EXPECT_NEAR(static_cast<double>(mismatches) / 1e5, 0.10, 0.01);
  }
}

TEST(Hcrud, SameSpecSameBytes) {
  HcrudSpec s = simple_spec(0.6, 0.05, 500);
  std::ostringstream a, b;
  write_csv(a, hcrud_generate(s));
  write_csv(b, hcrud_generate(s));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Hcrud, RuleListValidation) {
  HcrudSpec s = simple_spec(0.6, 0.0, 10);
  s.rules.clear();
  EXPECT_THROW(hcrud_generate(s), ConfigError);
  s = simple_spec(0.6, 0.0, 10);
  s.rules.pop_back();
  EXPECT_THROW(hcrud_generate(s), ConfigError);
  s = simple_spec(0.6, 0.0, 10);
  s.rules.front().label = 5;
  EXPECT_THROW(hcrud_generate(s), ConfigError);
}

TEST(ApkFeatures, DensityBalanceAndDeterminism) {
  Dataset ds = synth_apk_features(10000, 4896, 0.02, 5);
  double ones = 0.0;
  for (double v : ds.x.data()) ones += v;
  EXPECT_NEAR(ones / static_cast<double>(ds.x.size()), 0.02, 0.002);
  double positives = 0.0;
  for (int y : ds.y) positives += y;
  EXPECT_NEAR(positives / 10000.0, 0.5, 0.05);
  Dataset small_a = synth_apk_features(300, 200, 0.05, 9);
  Dataset small_b = synth_apk_features(300, 200, 0.05, 9);
  EXPECT_EQ(small_a, small_b);
}

TEST(Split, FullSizeTask2Counts) {
  HcrudSpec s = default_hcrud_spec(Task::task2);
  s.seed = 1;
  Dataset ds = hcrud_generate(s);
  Split sp = split(ds, 0.7, 2);
  EXPECT_EQ(sp.train.size(), 70000u);
  EXPECT_EQ(sp.test.size(), 30000u);
}

TEST(Split, PartitionAndPerClassFraction) {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + rng.below(500);
    const std::size_t k = 2 + rng.below(3);
    std::vector<int> labels = test::random_labels(n, k, rng);
    // every class needs two members
    for (std::size_t c = 0; c < k; ++c) labels[2 * c] = labels[2 * c + 1] = static_cast<int>(c);
    SplitIndices idx = split_indices(labels, k, 0.7, rng.next());
    std::set<std::size_t> all(idx.train.begin(), idx.train.end());
    for (std::size_t i : idx.test) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(idx.train.size(), static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n))));
    for (std::size_t c = 0; c < k; ++c) {
      double in_class = 0, in_train = 0;
      for (int l : labels) in_class += l == static_cast<int>(c);
      for (std::size_t i : idx.train) in_train += labels[i] == static_cast<int>(c);
      EXPECT_LE(std::abs(in_train - 0.7 * in_class), 1.0);
    }
  }
}

TEST(Split, SameSeedSameSplit) {
  Rng rng(5);
  auto labels = test::random_labels(200, 2, rng);
  SplitIndices a = split_indices(labels, 2, 0.7, 9), b = split_indices(labels, 2, 0.7, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
}

TEST(Split, SingletonClassIsRejected) {
  std::vector<int> labels{0, 0, 0, 1};
  EXPECT_THROW(split_indices(labels, 2, 0.7, 0), DataError);
}

TEST(Sequence, PerFeatureAndSingleStep) {
  std::vector<double> row{1.5, -2.0, 3.25};
  auto per = encode_sequence(std::span<const double>(row), SequenceMode::per_feature);
  ASSERT_EQ(per.size(), 3u);
  std::vector<double> joined;
  for (const auto& step : per) {
    ASSERT_EQ(step.size(), 1u);
    joined.push_back(step[0]);
  }
  EXPECT_EQ(joined, row);
  auto single = encode_sequence(std::span<const double>(row), SequenceMode::single_step);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0], row);
}

TEST(Sequence, StackedMatchesStepList) {
  Rng rng(6);
  Matrix batch = test::random_matrix(4, 5, rng);
  auto steps = encode_sequence(batch, SequenceMode::per_feature);
  Matrix stacked = encode_stacked(batch, SequenceMode::per_feature);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(stacked(t * 4 + r, 0), steps[t](r, 0));
}

}  // namespace
}  // namespace rnnsec
