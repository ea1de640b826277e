#pragma once

// Linear SVM baseline: Pegasos-style stochastic subgradient descent on the
// L2-regularized hinge loss, one-vs-rest for more than two classes.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "rnnsec/dataset.hpp"
#include "rnnsec/error.hpp"
#include "rnnsec/model.hpp"
#include "rnnsec/parallel.hpp"
#include "rnnsec/tensor.hpp"

namespace rnnsec {

struct SvmConfig {
  double lambda = 1e-4;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
};

struct LinearMachine {
  std::vector<double> w;
  double b = 0.0;

  double score(std::span<const double> x) const {
    double s = b;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
    return s;
  }
};

// Binary problems hold a single machine for class 1; K > 2 holds K machines.
// Inputs are standardized with the stored training mean and scale.
struct SvmParams {
  std::size_t n_classes = 2;
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<LinearMachine> machines;

  std::size_t n_features() const noexcept { return mean.size(); }
  friend bool operator==(const SvmParams& a, const SvmParams& b) {
    if (a.n_classes != b.n_classes || a.mean != b.mean || a.scale != b.scale ||
        a.machines.size() != b.machines.size())
      return false;
    for (std::size_t i = 0; i < a.machines.size(); ++i)
      if (a.machines[i].w != b.machines[i].w || a.machines[i].b != b.machines[i].b) return false;
    return true;
  }
};

struct SvmFit {
  SvmParams params;
  std::vector<std::vector<double>> objective;  // per machine, one value per epoch
};

inline Matrix standardize(const Matrix& x, const SvmParams& p) {
  if (x.cols() != p.n_features()) {
    throw ShapeError("svm: input " + x.shape() + " for a machine over " +
                     std::to_string(p.n_features()) + " features");
  }
  Matrix out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - p.mean[c]) / p.scale[c];
  }
  return out;
}

// lambda/2 (|w|^2 + b^2) + mean hinge loss, targets in {-1, +1}.
inline double svm_objective(const LinearMachine& m, const Matrix& z,
                            const std::vector<double>& targets, double lambda) {
  double norm = m.b * m.b;
  for (double v : m.w) norm += v * v;
  double hinge = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i)
    hinge += std::max(0.0, 1.0 - targets[i] * m.score(z.row(i)));
  return 0.5 * lambda * norm + hinge / static_cast<double>(z.rows());
}

namespace detail {

// The bias is handled as a weight on a constant input and shares the
// regularizer; the iterate is projected onto the ball of radius 1/sqrt(lambda).
// The returned machine is the running average of all iterates, whose
// objective settles smoothly where the last iterate keeps jittering.
inline LinearMachine pegasos(const Matrix& z, const std::vector<double>& targets,
                             const SvmConfig& cfg, Rng rng, std::vector<double>* trace) {
  LinearMachine m{std::vector<double>(z.cols(), 0.0), 0.0};
  LinearMachine avg = m;
  const std::size_t n = z.rows();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  const double radius = 1.0 / std::sqrt(cfg.lambda);
  std::uint64_t t = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (cfg.lambda * static_cast<double>(t));
      auto x = z.row(i);
      const double margin = targets[i] * m.score(x);
      const double shrink = 1.0 - eta * cfg.lambda;
      for (double& v : m.w) v *= shrink;
      m.b *= shrink;
      if (margin < 1.0) {
        const double step = eta * targets[i];
        for (std::size_t c = 0; c < m.w.size(); ++c) m.w[c] += step * x[c];
        m.b += step;
      }
      double norm = m.b * m.b;
      for (double v : m.w) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > radius) {
        const double s = radius / norm;
        for (double& v : m.w) v *= s;
        m.b *= s;
      }
      const double weight = 1.0 / static_cast<double>(t);
      for (std::size_t c = 0; c < m.w.size(); ++c) avg.w[c] += (m.w[c] - avg.w[c]) * weight;
      avg.b += (m.b - avg.b) * weight;
    }
    if (trace) trace->push_back(svm_objective(avg, z, targets, cfg.lambda));
  }
  return avg;
}

}  // namespace detail

inline SvmFit svm_fit(const Dataset& data, const SvmConfig& cfg, std::size_t jobs = 1) {
  if (!(cfg.lambda > 0.0)) throw ConfigError("svm: lambda must be positive");
  validate(data);
  const std::size_t k = data.schema.n_classes;
  std::size_t present = 0;
  for (std::size_t c : data.class_counts()) present += c > 0;
  if (present < 2) throw DataError("svm: training data contains fewer than 2 classes");

  SvmFit fit;
  SvmParams& p = fit.params;
  p.n_classes = k;
  const std::size_t f = data.x.cols();
  const double n = static_cast<double>(data.size());
  p.mean.assign(f, 0.0);
  p.scale.assign(f, 0.0);
  for (std::size_t r = 0; r < data.size(); ++r)
    for (std::size_t c = 0; c < f; ++c) p.mean[c] += data.x(r, c);
  for (double& m : p.mean) m /= n;
  for (std::size_t r = 0; r < data.size(); ++r)
    for (std::size_t c = 0; c < f; ++c) {
      const double d = data.x(r, c) - p.mean[c];
      p.scale[c] += d * d;
    }
  for (double& s : p.scale) {
    s = std::sqrt(s / n);
    if (!(s > 0.0)) s = 1.0;
  }
  const Matrix z = standardize(data.x, p);

  const std::size_t machines = k == 2 ? 1 : k;
  Rng root(cfg.seed);
  std::vector<Rng> rngs;
  for (std::size_t m = 0; m < machines; ++m) rngs.push_back(root.split());

  struct Trained {
    LinearMachine machine;
    std::vector<double> trace;
  };
  auto results = parallel_map(machines, jobs, [&](std::size_t m) {
    const int positive = k == 2 ? 1 : static_cast<int>(m);
    std::vector<double> targets(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) targets[i] = data.y[i] == positive ? 1.0 : -1.0;
    Trained t;
    t.machine = detail::pegasos(z, targets, cfg, rngs[m], &t.trace);
    return t;
  });
  for (auto& r : results) {
    p.machines.push_back(std::move(r.machine));
    fit.objective.push_back(std::move(r.trace));
  }
  return fit;
}

inline SvmParams svm_train(const Dataset& data, const SvmConfig& cfg, std::size_t jobs = 1) {
  return svm_fit(data, cfg, jobs).params;
}

// N x machines decision values.
inline Matrix svm_scores(const SvmParams& p, const Matrix& x) {
  const Matrix z = standardize(x, p);
  Matrix s(z.rows(), p.machines.size());
  for (std::size_t r = 0; r < z.rows(); ++r)
    for (std::size_t m = 0; m < p.machines.size(); ++m) s(r, m) = p.machines[m].score(z.row(r));
  return s;
}

// Binary: 1 iff score >= 0. Multiclass: argmax, lowest index wins ties.
inline std::vector<int> labels_from_scores(const Matrix& scores) {
  std::vector<int> labels(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    if (scores.cols() == 1) {
      labels[r] = scores(r, 0) >= 0.0 ? 1 : 0;
      continue;
    }
    auto row = scores.row(r);
    labels[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return labels;
}

inline std::vector<int> svm_predict(const SvmParams& p, const Matrix& x) {
  return labels_from_scores(svm_scores(p, x));
}

// Same envelope as the model file with its own magic.
inline constexpr char kSvmMagic[8] = {'R', 'N', 'N', 'S', 'E', 'C', 'S', 'V'};
inline constexpr std::uint32_t kSvmFormatVersion = 1;

inline void write_svm(std::ostream& out, const SvmParams& p) {
  out.write(kSvmMagic, 8);
  io::put_u32(out, kSvmFormatVersion);
  io::put_u32(out, static_cast<std::uint32_t>(p.n_classes));
  io::put_u32(out, static_cast<std::uint32_t>(p.n_features()));
  io::put_u32(out, static_cast<std::uint32_t>(p.machines.size()));
  for (double v : p.mean) io::put_f64(out, v);
  for (double v : p.scale) io::put_f64(out, v);
  for (const auto& m : p.machines) {
    for (double v : m.w) io::put_f64(out, v);
    io::put_f64(out, m.b);
  }
}

inline SvmParams read_svm(std::istream& in) {
  io::check_magic(in, kSvmMagic, "svm");
  const std::uint32_t version = io::get_u32(in);
  if (version != kSvmFormatVersion) {
    throw DataError("unsupported svm format version " + std::to_string(version));
  }
  SvmParams p;
  p.n_classes = io::get_u32(in);
  const std::size_t f = io::get_u32(in);
  const std::size_t machines = io::get_u32(in);
  p.mean.resize(f);
  p.scale.resize(f);
  for (double& v : p.mean) v = io::get_f64(in);
  for (double& v : p.scale) v = io::get_f64(in);
  p.machines.resize(machines);
  for (auto& m : p.machines) {
    m.w.resize(f);
    for (double& v : m.w) v = io::get_f64(in);
    m.b = io::get_f64(in);
  }
  return p;
}

inline void save_svm(const std::string& path, const SvmParams& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_svm(out, p);
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline SvmParams load_svm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_svm(in);
}

}  // namespace rnnsec
