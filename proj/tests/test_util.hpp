#pragma once

// Test-only helpers: independent reference implementations and generators.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "rnnsec/dataset.hpp"
#include "rnnsec/tensor.hpp"

namespace rnnsec::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < a.cols(); ++t) s += a(i, t) * b(t, j);
      c(i, j) = s;
    }
  return c;
}

inline double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

// Max relative error between `analytic` and central differences of `loss`
// with respect to every entry of `param`.
inline double fd_check(Matrix& param, const Matrix& analytic, const std::function<double()>& loss,
                       double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t i = 0; i < param.size(); ++i) {
    double& v = param.data()[i];
    const double saved = v;
    v = saved + h;
    const double plus = loss();
    v = saved - h;
    const double minus = loss();
    v = saved;
    worst = std::max(worst, rel_err(analytic.data()[i], (plus - minus) / (2.0 * h)));
  }
  return worst;
}

// Scalar projection used to turn a matrix output into a loss: sum(w .* y).
inline double weighted_sum(const Matrix& y, const Matrix& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * w.data()[i];
  return s;
}

// Two well separated clusters: class c has every feature in c*2-1 +- 0.5,
// i.e. [-1.5, -0.5] or [0.5, 1.5]. Labels alternate so classes are balanced.
inline Dataset blobs(std::size_t n, std::size_t features, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.schema.n_features = features;
  ds.schema.n_classes = 2;
  ds.x = Matrix(n, features);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    ds.y.push_back(label);
    for (double& v : ds.x.row(i)) v = (label ? 1.0 : -1.0) + rng.uniform(-0.5, 0.5);
  }
  return ds;
}

// Random labels in [0, k).
inline std::vector<int> random_labels(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<int> y(n);
  for (int& v : y) v = static_cast<int>(rng.below(k));
  return y;
}

}  // namespace rnnsec::test
