#pragma once

// Binary and categorical cross-entropy, the fused head gradients, and SGD.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "rnnsec/error.hpp"
#include "rnnsec/layers.hpp"
#include "rnnsec/tensor.hpp"

namespace rnnsec {

inline constexpr double kProbabilityClamp = 1e-12;

enum class Head { sigmoid, softmax };

inline const char* to_string(Head h) { return h == Head::sigmoid ? "sigmoid" : "softmax"; }

// Predicted probabilities and expected labels for N samples. Binary batches
// are N x 1; categorical batches are N x K with one-hot expectations.
struct PredictionBatch {
  Matrix predicted;
  Matrix expected;

  std::size_t size() const noexcept { return predicted.rows(); }
};

namespace detail {

inline void check_batch(const PredictionBatch& batch, const char* op) {
  if (batch.size() == 0) throw ArgumentError(std::string(op) + ": empty batch");
  if (batch.predicted.rows() != batch.expected.rows() ||
      batch.predicted.cols() != batch.expected.cols()) {
    throw ShapeError(std::string(op) + ": predicted " + batch.predicted.shape() +
                     " vs expected " + batch.expected.shape());
  }
}

}  // namespace detail

// -(1/N) sum [y ln p + (1-y) ln(1-p)], p clamped to [eps, 1-eps].
inline double bce_loss(const PredictionBatch& batch) {
  detail::check_batch(batch, "bce_loss");
  if (batch.predicted.cols() != 1) {
    throw ShapeError("bce_loss: binary batch must be N x 1, got " + batch.predicted.shape());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const double p =
        std::clamp(batch.predicted(i, 0), kProbabilityClamp, 1.0 - kProbabilityClamp);
    const double y = batch.expected(i, 0);
    total += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return -total / static_cast<double>(batch.size());
}

// Batch mean of H(true, predicted) = -sum_x true(x) ln pred(x).
inline double cce_loss(const PredictionBatch& batch) {
  detail::check_batch(batch, "cce_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t k = 0; k < batch.predicted.cols(); ++k) {
      const double t = batch.expected(i, k);
      if (t == 0.0) continue;
      total += t * std::log(std::max(batch.predicted(i, k), kProbabilityClamp));
    }
  }
  return -total / static_cast<double>(batch.size());
}

// Expected-label matrix for integer labels: N x 1 for the sigmoid head,
// one-hot N x K for softmax.
inline Matrix encode_labels(std::span<const int> labels, Head head, std::size_t width) {
  if (head == Head::sigmoid) {
    if (width != 1) {
      throw UsageError("sigmoid head needs output width 1, got " + std::to_string(width));
    }
    Matrix y(labels.size(), 1);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != 0 && labels[i] != 1) {
        throw UsageError("sigmoid head needs binary labels, sample " + std::to_string(i) +
                         " has label " + std::to_string(labels[i]));
      }
      y(i, 0) = labels[i];
    }
    return y;
  }
  if (width < 2) {
    throw UsageError("softmax head needs output width >= 2, got " + std::to_string(width));
  }
  Matrix y(labels.size(), width);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= width) {
      throw UsageError("label " + std::to_string(labels[i]) + " of sample " + std::to_string(i) +
                       " does not fit a softmax head of width " + std::to_string(width));
    }
    y(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return y;
}

inline Matrix apply_head(const Matrix& logits, Head head) {
  return head == Head::sigmoid ? sigmoid(logits) : softmax(logits);
}

struct HeadLossGrad {
  double loss = 0.0;
  Matrix probabilities;
  Matrix grad;  // d loss / d logits
};

// Loss of the head applied to logits, and its gradient with respect to the
// logits via the fused form (probability - label) / N.
inline HeadLossGrad head_loss_grad(const Matrix& logits, std::span<const int> labels, Head head) {
  if (logits.rows() != labels.size()) {
    throw ShapeError("head_loss_grad: " + std::to_string(labels.size()) + " labels for logits " +
                     logits.shape());
  }
  if (labels.empty()) throw ArgumentError("head_loss_grad: empty batch");
  HeadLossGrad out;
  Matrix expected = encode_labels(labels, head, logits.cols());
  out.probabilities = apply_head(logits, head);
  PredictionBatch batch{out.probabilities, expected};
  out.loss = head == Head::sigmoid ? bce_loss(batch) : cce_loss(batch);
  out.grad = out.probabilities - expected;
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  for (double& v : out.grad.data()) v *= inv_n;
  return out;
}

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.0;
};

// velocity <- momentum * velocity + grad; param <- param - lr * velocity
inline void sgd_step(Matrix& param, const Matrix& grad, const SgdConfig& cfg, Matrix& velocity) {
  if (param.rows() != grad.rows() || param.cols() != grad.cols() ||
      velocity.rows() != grad.rows() || velocity.cols() != grad.cols()) {
    throw ShapeError("sgd_step: param " + param.shape() + ", grad " + grad.shape() +
                     ", velocity " + velocity.shape());
  }
  auto p = param.data();
  auto g = grad.data();
  auto v = velocity.data();
  if (cfg.momentum == 0.0) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = g[i];
      p[i] -= cfg.learning_rate * g[i];
    }
    return;
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = cfg.momentum * v[i] + g[i];
    p[i] -= cfg.learning_rate * v[i];
  }
}

}  // namespace rnnsec
