#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <numeric>

#include "rnnsec/tensor.hpp"
#include "test_util.hpp"

namespace rnnsec {
namespace {

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Rng rng(3);
  Matrix x = test::random_matrix(3, 5, rng);
  EXPECT_EQ(matmul(Matrix::identity(3), x), x);
}

TEST(Matmul, SmallProductMatchesTripleLoop) {
  Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  Matrix b = Matrix::from_rows({{5}, {6}});
  Matrix c = matmul(a, b);
  EXPECT_EQ(c, Matrix::from_rows({{17}, {39}}));
  EXPECT_EQ(c, test::naive_matmul(a, b));
}

TEST(Matmul, ZeroLeftOperandGivesZeros) {
  Rng rng(4);
  Matrix x = test::random_matrix(4, 3, rng);
  Matrix z = matmul(Matrix(2, 4), x);
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
  try {
    matmul(Matrix(2, 3), Matrix(4, 5));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos);
    EXPECT_NE(msg.find("4x5"), std::string::npos);
  }
}

TEST(Matmul, AgreesWithNaiveOnRandomShapes) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 1 + rng.below(9), k = 1 + rng.below(9), n = 1 + rng.below(9);
    Matrix a = test::random_matrix(m, k, rng);
    Matrix b = test::random_matrix(k, n, rng);
    EXPECT_LE(max_abs_diff(matmul(a, b), test::naive_matmul(a, b)), 1e-12);
    EXPECT_LE(max_abs_diff(matmul_nt(a, transpose(b)), test::naive_matmul(a, b)), 1e-12);
  }
}

TEST(Matmul, Associativity) {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a = test::random_matrix(5, 5, rng), b = test::random_matrix(5, 5, rng),
           c = test::random_matrix(5, 5, rng);
    EXPECT_LE(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))), 1e-10);
  }
}

TEST(Transpose, Basics) {
  EXPECT_EQ(transpose(Matrix::from_rows({{1, 2, 3}})), Matrix::from_rows({{1}, {2}, {3}}));
  EXPECT_EQ(transpose(Matrix::from_rows({{7}})), Matrix::from_rows({{7}}));
  Rng rng(8);
  Matrix x = test::random_matrix(4, 7, rng);
  EXPECT_EQ(transpose(transpose(x)), x);
}

TEST(Transpose, OfProductIsReversedProductOfTransposes) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix a = test::random_matrix(4, 6, rng), b = test::random_matrix(6, 3, rng);
    EXPECT_LE(max_abs_diff(transpose(matmul(a, b)), matmul(transpose(b), transpose(a))), 1e-12);
  }
}

TEST(Rng, SplitMix64GoldenStream) {
  // Reference values computed independently from the published algorithm.
  Rng zero(0);
  EXPECT_EQ(zero.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(zero.next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(zero.next(), 0x06C45D188009454FULL);
  EXPECT_EQ(zero.next(), 0xF88BB8A8724C81ECULL);
  Rng r(1234567);
  const std::uint64_t expected[] = {6457827717110365317ULL, 3203168211198807973ULL,
                                    9817491932198370423ULL, 4593380528125082431ULL,
                                    16408922859458223821ULL};
  for (std::uint64_t e : expected) EXPECT_EQ(r.next(), e);
}

TEST(Rng, UniformUsesTop53Bits) {
  Rng r(42);
  EXPECT_DOUBLE_EQ(r.uniform(), 0.7415648787718233);
  EXPECT_DOUBLE_EQ(r.uniform(), 0.1599103928769201);
  EXPECT_DOUBLE_EQ(r.uniform(), 0.27860113025513866);
}

TEST(Rng, UniformSequencesAreDeterministicAndInRange) {
  Rng a(77), b(77);
  auto xs = rng_uniform(a, 1000, -2.0, 3.0);
  auto ys = rng_uniform(b, 1000, -2.0, 3.0);
  EXPECT_EQ(xs, ys);
  for (double v : xs) {
    EXPECT_GE(v, -2.0);
    EXPECT_LT(v, 3.0);
  }
}

TEST(Rng, UniformMeanConverges) {
  Rng r(42);
  auto xs = rng_uniform(r, 100000, 0.0, 1.0);
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  EXPECT_NEAR(mean, 0.5, 0.01);
}

TEST(Rng, EmptyRangeIsArgumentError) {
  Rng r(1);
  EXPECT_THROW(rng_uniform(r, 3, 1.0, 1.0), ArgumentError);
  EXPECT_THROW(rng_uniform(r, 3, 2.0, 1.0), ArgumentError);
}

TEST(Rng, AdvancesStateOncePerDraw) {
  Rng a(5), b(5);
  rng_uniform(a, 7, 0.0, 1.0);
  for (int i = 0; i < 7; ++i) b.next();
  EXPECT_EQ(a, b);
}

TEST(Rng, DerivedSeedsDependOnEveryTag) {
  EXPECT_EQ(derive_seed(9, {1, 2}), derive_seed(9, {1, 2}));
  EXPECT_NE(derive_seed(9, {1, 2}), derive_seed(9, {2, 1}));
  EXPECT_NE(derive_seed(9, {1}), derive_seed(10, {1}));
}

}  // namespace
}  // namespace rnnsec
