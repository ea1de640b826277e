#pragma once

// Layer kernels: Elman recurrent cells, dense, batch normalization, inverted
// dropout, and the output activations. Each forward returns whatever its
// backward needs; backward functions return exact reverse-mode gradients.
//
// All layers are batched: a "vector" argument is a B x n matrix with one
// sample per row, so single-sample use is simply B = 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <string>
#include <vector>

#include "rnnsec/error.hpp"
#include "rnnsec/tensor.hpp"

namespace rnnsec {

enum class Mode { train, infer };

// ---------------------------------------------------------------------------
// Recurrent (Elman) layer: h_t = tanh(x_t W_in^T + h_{t-1} W_rec^T + b)
//
// Sequences are stored stacked: a T-step batch of B rows of width D is one
// (T*B) x D matrix whose block t holds rows [t*B, (t+1)*B). Input
// projections and weight gradients then run as single large products over
// all timesteps; only the recurrence itself is sequential.

struct RecurrentParams {
  Matrix w_in;   // H x D
  Matrix w_rec;  // H x H
  Matrix b;      // 1 x H

  std::size_t hidden() const noexcept { return w_in.rows(); }
  std::size_t input() const noexcept { return w_in.cols(); }

  static RecurrentParams zeros(std::size_t input_dim, std::size_t hidden_dim) {
    return {Matrix(hidden_dim, input_dim), Matrix(hidden_dim, hidden_dim), Matrix(1, hidden_dim)};
  }
};

struct RecurrentGrads {
  Matrix w_in;
  Matrix w_rec;
  Matrix b;
};

struct RecurrentCache {
  std::size_t steps = 0;
  std::size_t batch = 0;
  Matrix inputs;  // (T*B) x D
  Matrix hidden;  // (T*B) x H
  Matrix h0;      // B x H
};

struct RecurrentBackward {
  RecurrentGrads grads;
  Matrix grad_inputs;  // (T*B) x D, empty when not requested
  Matrix grad_h0;
};

namespace detail {

inline void check_recurrent(const RecurrentParams& p) {
  const std::size_t h = p.hidden();
  if (h == 0 || p.input() == 0) throw ShapeError("recurrent params must have H >= 1 and D >= 1");
  if (p.w_rec.rows() != h || p.w_rec.cols() != h) {
    throw ShapeError("recurrent w_rec is " + p.w_rec.shape() + ", expected " +
                     Matrix::shape_string(h, h));
  }
  if (p.b.rows() != 1 || p.b.cols() != h) {
    throw ShapeError("recurrent bias is " + p.b.shape() + ", expected " +
                     Matrix::shape_string(1, h));
  }
}

inline auto rows_block(Matrix& m, std::size_t first, std::size_t count) {
  return MutMap(m.data().data() + first * m.cols(), static_cast<Eigen::Index>(count),
                static_cast<Eigen::Index>(m.cols()));
}
inline auto rows_block(const Matrix& m, std::size_t first, std::size_t count) {
  return ConstMap(m.data().data() + first * m.cols(), static_cast<Eigen::Index>(count),
                  static_cast<Eigen::Index>(m.cols()));
}

// tanh(x) = 1 - 2 / (exp(2x) + 1) on Eigen's vectorized exp. Absolute error
// stays within a few ulp of 1; saturates to exactly +-1 like std::tanh.
// Eigen evaluates unaligned leading and trailing elements with a scalar exp
// that rounds differently, so the values go through an aligned buffer padded
// to whole packets; each element then gets the same result wherever it lives.
inline void tanh_inplace(std::span<double> values) {
  constexpr std::size_t kPad = 16;
  thread_local Eigen::ArrayXd buf;
  const std::size_t n = values.size();
  const std::size_t padded = (n + kPad - 1) / kPad * kPad;
  if (static_cast<std::size_t>(buf.size()) < padded) buf.resize(static_cast<Eigen::Index>(padded));
  auto a = buf.head(static_cast<Eigen::Index>(padded));
  std::copy(values.begin(), values.end(), a.data());
  std::fill(a.data() + n, a.data() + padded, 0.0);
  a = 1.0 - 2.0 / ((2.0 * a).exp() + 1.0);
  std::copy(a.data(), a.data() + n, values.begin());
}

}  // namespace detail

// One step for a B x D input and B x H previous state.
inline Matrix rnn_cell_forward(const Matrix& x_t, const Matrix& h_prev, const RecurrentParams& p) {
  detail::check_recurrent(p);
  if (x_t.cols() != p.input() || h_prev.cols() != p.hidden() || x_t.rows() != h_prev.rows()) {
    throw ShapeError("rnn_cell_forward: input " + x_t.shape() + " and state " + h_prev.shape() +
                     " do not match params with D=" + std::to_string(p.input()) +
                     ", H=" + std::to_string(p.hidden()));
  }
  // same operation order as rnn_forward_stacked so both agree bit for bit
  Matrix z = matmul_nt(x_t, p.w_in);
  add_row_vector(z, p.b);
  detail::view(z).noalias() += detail::view(h_prev) * detail::view(p.w_rec).transpose();
  detail::tanh_inplace(z.data());
  return z;
}

// Folds the cell over a stacked sequence of `steps` blocks.
inline RecurrentCache rnn_forward_stacked(Matrix inputs, std::size_t steps,
                                          const RecurrentParams& p, const Matrix& h0) {
  detail::check_recurrent(p);
  if (steps == 0) throw ArgumentError("rnn_layer_forward: empty sequence");
  if (inputs.rows() % steps != 0 || inputs.cols() != p.input()) {
    throw ShapeError("rnn_layer_forward: stacked input " + inputs.shape() + " for " +
                     std::to_string(steps) + " steps of width " + std::to_string(p.input()));
  }
  const std::size_t batch = inputs.rows() / steps;
  if (h0.rows() != batch || h0.cols() != p.hidden()) {
    throw ShapeError("rnn_layer_forward: initial state " + h0.shape() + ", expected " +
                     Matrix::shape_string(batch, p.hidden()));
  }
  RecurrentCache cache;
  cache.steps = steps;
  cache.batch = batch;
  cache.hidden = matmul_nt(inputs, p.w_in);
  add_row_vector(cache.hidden, p.b);
  const auto w_rec_t = detail::view(p.w_rec).transpose();
  for (std::size_t t = 0; t < steps; ++t) {
    auto z = detail::rows_block(cache.hidden, t * batch, batch);
    if (t == 0) {
      z.noalias() += detail::view(h0) * w_rec_t;
    } else {
      z.noalias() += detail::rows_block(std::as_const(cache.hidden), (t - 1) * batch, batch) * w_rec_t;
    }
    detail::tanh_inplace({z.data(), batch * p.hidden()});
  }
  cache.inputs = std::move(inputs);
  cache.h0 = h0;
  return cache;
}

// Backpropagation through time. grad_out is stacked like the hidden
// sequence. grad_inputs is skipped when want_input_grad is false.
inline RecurrentBackward rnn_backward_stacked(const RecurrentCache& cache, const RecurrentParams& p,
                                              const Matrix& grad_out, bool want_input_grad = true) {
  const std::size_t steps = cache.steps;
  const std::size_t batch = cache.batch;
  const std::size_t h = p.hidden();
  if (grad_out.rows() != cache.hidden.rows() || grad_out.cols() != h) {
    throw ShapeError("rnn_layer_backward: output gradient " + grad_out.shape() + ", expected " +
                     cache.hidden.shape());
  }
  Matrix da = grad_out;
  Matrix carry(batch, h);
  const auto w_rec = detail::view(p.w_rec);
  for (std::size_t t = steps; t-- > 0;) {
    auto block = detail::rows_block(da, t * batch, batch);
    auto hb = detail::rows_block(cache.hidden, t * batch, batch);
    block += detail::view(std::as_const(carry));
    block.array() *= 1.0 - hb.array().square();
    if (t > 0) detail::view(carry).noalias() = block * w_rec;
  }

  RecurrentBackward out;
  out.grads.w_in = Matrix(h, p.input());
  accumulate_tn(out.grads.w_in, da, cache.inputs);
  out.grads.w_rec = Matrix(h, h);
  auto gw_rec = detail::view(out.grads.w_rec);
  gw_rec.noalias() = detail::rows_block(da, 0, batch).transpose() * detail::view(cache.h0);
  if (steps > 1) {
    gw_rec.noalias() += detail::rows_block(da, batch, (steps - 1) * batch).transpose() *
                        detail::rows_block(cache.hidden, 0, (steps - 1) * batch);
  }
  out.grads.b = column_sums(da);
  out.grad_h0 = matmul(Matrix(batch, h, std::vector<double>(da.data().begin(),
                                                            da.data().begin() + batch * h)),
                       p.w_rec);
  if (want_input_grad) out.grad_inputs = matmul(da, p.w_in);
  return out;
}

namespace detail {

inline Matrix stack_steps(const std::vector<Matrix>& seq) {
  const std::size_t batch = seq.front().rows();
  const std::size_t width = seq.front().cols();
  Matrix out(seq.size() * batch, width);
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t].rows() != batch || seq[t].cols() != width) {
      throw ShapeError("sequence step " + std::to_string(t) + " is " + seq[t].shape() +
                       ", expected " + Matrix::shape_string(batch, width));
    }
    std::copy(seq[t].data().begin(), seq[t].data().end(),
              out.data().begin() + static_cast<std::ptrdiff_t>(t * batch * width));
  }
  return out;
}

inline std::vector<Matrix> unstack_steps(const Matrix& stacked, std::size_t steps) {
  const std::size_t batch = stacked.rows() / steps;
  std::vector<Matrix> out;
  out.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    auto first = stacked.data().begin() + static_cast<std::ptrdiff_t>(t * batch * stacked.cols());
    out.emplace_back(batch, stacked.cols(),
                     std::vector<double>(first, first + static_cast<std::ptrdiff_t>(batch * stacked.cols())));
  }
  return out;
}

}  // namespace detail

struct RecurrentForward {
  std::vector<Matrix> hidden;
  RecurrentCache cache;
};

// List-of-steps form: seq[t] is B x D.
inline RecurrentForward rnn_layer_forward(const std::vector<Matrix>& seq, const RecurrentParams& p,
                                          const Matrix& h0) {
  if (seq.empty()) throw ArgumentError("rnn_layer_forward: empty sequence");
  RecurrentForward out;
  out.cache = rnn_forward_stacked(detail::stack_steps(seq), seq.size(), p, h0);
  out.hidden = detail::unstack_steps(out.cache.hidden, seq.size());
  return out;
}

struct RecurrentStepGrads {
  RecurrentGrads grads;
  std::vector<Matrix> grad_inputs;
  Matrix grad_h0;
};

inline RecurrentStepGrads rnn_layer_backward(const RecurrentCache& cache, const RecurrentParams& p,
                                             const std::vector<Matrix>& grad_out) {
  if (grad_out.size() != cache.steps) {
    throw ShapeError("rnn_layer_backward: got " + std::to_string(grad_out.size()) +
                     " output gradients for " + std::to_string(cache.steps) + " timesteps");
  }
  RecurrentBackward b = rnn_backward_stacked(cache, p, detail::stack_steps(grad_out));
  return {std::move(b.grads), detail::unstack_steps(b.grad_inputs, cache.steps),
          std::move(b.grad_h0)};
}

// ---------------------------------------------------------------------------
// Dense: y = x W^T + b

struct DenseParams {
  Matrix w;  // O x I
  Matrix b;  // 1 x O

  static DenseParams zeros(std::size_t in, std::size_t out) {
    return {Matrix(out, in), Matrix(1, out)};
  }
};

struct DenseGrads {
  Matrix w;
  Matrix b;
};

struct DenseBackward {
  DenseGrads grads;
  Matrix grad_input;
};

inline Matrix dense_forward(const Matrix& x, const DenseParams& p) {
  if (x.cols() != p.w.cols() || p.b.rows() != 1 || p.b.cols() != p.w.rows()) {
    throw ShapeError("dense_forward: input " + x.shape() + " against weights " + p.w.shape() +
                     " and bias " + p.b.shape());
  }
  Matrix y = matmul_nt(x, p.w);
  add_row_vector(y, p.b);
  return y;
}

inline DenseBackward dense_backward(const Matrix& input, const DenseParams& p,
                                    const Matrix& grad_out) {
  if (grad_out.rows() != input.rows() || grad_out.cols() != p.w.rows()) {
    throw ShapeError("dense_backward: gradient " + grad_out.shape() + " for input " +
                     input.shape() + " and weights " + p.w.shape());
  }
  DenseBackward out;
  out.grads.w = Matrix(p.w.rows(), p.w.cols());
  accumulate_tn(out.grads.w, grad_out, input);
  out.grads.b = column_sums(grad_out);
  out.grad_input = matmul(grad_out, p.w);
  return out;
}

// ---------------------------------------------------------------------------
// Batch normalization over the rows of a B x F matrix. Train mode uses the
// biased (divide-by-B) batch variance and stores that estimate in the
// running statistics.

struct BatchNormParams {
  Matrix gamma;         // 1 x F, init 1
  Matrix beta;          // 1 x F, init 0
  Matrix running_mean;  // 1 x F, init 0
  Matrix running_var;   // 1 x F, init 1
  double momentum = 0.9;
  double epsilon = 1e-5;

  static BatchNormParams init(std::size_t features) {
    return {Matrix(1, features, 1.0), Matrix(1, features), Matrix(1, features),
            Matrix(1, features, 1.0)};
  }
  std::size_t features() const noexcept { return gamma.cols(); }
};

struct BatchNormCache {
  Mode mode = Mode::infer;
  Matrix normalized;  // x_hat
  Matrix inv_std;     // 1 x F
};

struct BatchNormForward {
  Matrix out;
  BatchNormCache cache;
};

struct BatchNormBackward {
  Matrix grad_input;
  Matrix grad_gamma;
  Matrix grad_beta;
};

inline BatchNormForward batchnorm_forward(const Matrix& x, BatchNormParams& p, Mode mode) {
  const std::size_t batch = x.rows();
  const std::size_t feats = x.cols();
  if (feats != p.features()) {
    throw ShapeError("batchnorm_forward: input " + x.shape() + " for " +
                     std::to_string(p.features()) + " features");
  }
  if (!(p.epsilon > 0.0)) throw ArgumentError("batchnorm epsilon must be positive");

  BatchNormForward out;
  out.cache.mode = mode;
  out.cache.inv_std = Matrix(1, feats);
  out.cache.normalized = Matrix(batch, feats);
  Matrix mean(1, feats);

  if (mode == Mode::train) {
    if (batch < 2) {
      throw ArgumentError("batchnorm_forward: train mode needs a batch of at least 2, got " +
                          std::to_string(batch));
    }
    const double n = static_cast<double>(batch);
    Matrix var(1, feats);
    for (std::size_t c = 0; c < feats; ++c) {
      // Shifted by the first row so a constant column has mean exactly x[0][c].
      const double shift = x(0, c);
      double s = 0.0;
      for (std::size_t r = 0; r < batch; ++r) s += x(r, c) - shift;
      const double m = shift + s / n;
      double ss = 0.0;
      for (std::size_t r = 0; r < batch; ++r) {
        const double d = x(r, c) - m;
        ss += d * d;
      }
      mean(0, c) = m;
      var(0, c) = ss / n;
    }
    for (std::size_t c = 0; c < feats; ++c) {
      p.running_mean(0, c) = p.momentum * p.running_mean(0, c) + (1.0 - p.momentum) * mean(0, c);
      p.running_var(0, c) = p.momentum * p.running_var(0, c) + (1.0 - p.momentum) * var(0, c);
      out.cache.inv_std(0, c) = 1.0 / std::sqrt(var(0, c) + p.epsilon);
    }
  } else {
    for (std::size_t c = 0; c < feats; ++c) {
      mean(0, c) = p.running_mean(0, c);
      out.cache.inv_std(0, c) = 1.0 / std::sqrt(p.running_var(0, c) + p.epsilon);
    }
  }

  out.out = Matrix(batch, feats);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t c = 0; c < feats; ++c) {
      const double xhat = (x(r, c) - mean(0, c)) * out.cache.inv_std(0, c);
      out.cache.normalized(r, c) = xhat;
      out.out(r, c) = p.gamma(0, c) * xhat + p.beta(0, c);
    }
  }
  return out;
}

inline BatchNormBackward batchnorm_backward(const BatchNormCache& cache, const BatchNormParams& p,
                                            const Matrix& grad) {
  if (cache.mode != Mode::train) {
    throw UsageError("batchnorm_backward: cache comes from an inference-mode forward pass");
  }
  const Matrix& xhat = cache.normalized;
  if (grad.rows() != xhat.rows() || grad.cols() != xhat.cols()) {
    throw ShapeError("batchnorm_backward: gradient " + grad.shape() + ", expected " +
                     xhat.shape());
  }
  const std::size_t batch = xhat.rows();
  const std::size_t feats = xhat.cols();
  const double n = static_cast<double>(batch);

  BatchNormBackward out{Matrix(batch, feats), Matrix(1, feats), Matrix(1, feats)};
  for (std::size_t c = 0; c < feats; ++c) {
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::size_t r = 0; r < batch; ++r) {
      sum_g += grad(r, c);
      sum_gx += grad(r, c) * xhat(r, c);
    }
    out.grad_beta(0, c) = sum_g;
    out.grad_gamma(0, c) = sum_gx;
    const double scale = p.gamma(0, c) * cache.inv_std(0, c) / n;
    for (std::size_t r = 0; r < batch; ++r) {
      out.grad_input(r, c) = scale * (n * grad(r, c) - sum_g - xhat(r, c) * sum_gx);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inverted dropout: kept activations are scaled by 1/(1-rate) at train time,
// so inference is the identity.

struct DropoutSpec {
  double rate = 0.001;
  Rng rng{0};
};

struct DropoutForward {
  Matrix out;
  Matrix mask;  // 0/1 entries
};

inline DropoutForward dropout_forward(const Matrix& x, DropoutSpec& spec, Mode mode) {
  if (!(spec.rate >= 0.0 && spec.rate < 1.0)) {
    throw ArgumentError("dropout rate must lie in [0, 1), got " + std::to_string(spec.rate));
  }
  DropoutForward out{x, Matrix(x.rows(), x.cols(), 1.0)};
  if (mode == Mode::infer || spec.rate == 0.0) return out;
  const double keep_scale = 1.0 / (1.0 - spec.rate);
  auto od = out.out.data();
  auto md = out.mask.data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    if (spec.rng.uniform() < spec.rate) {
      md[i] = 0.0;
      od[i] = 0.0;
    } else {
      od[i] *= keep_scale;
    }
  }
  return out;
}

inline Matrix dropout_backward(const Matrix& grad, const Matrix& mask, double rate) {
  Matrix g = hadamard(grad, mask);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : g.data()) v *= keep_scale;
  return g;
}

// ---------------------------------------------------------------------------
// Output activations.

inline double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline Matrix sigmoid(const Matrix& z) {
  return map(z, [](double v) { return sigmoid(v); });
}

// Row-wise softmax with max subtraction.
inline Matrix softmax(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto in = z.row(r);
    auto o = out.row(r);
    double top = in.empty() ? 0.0 : in[0];
    for (double v : in) top = std::max(top, v);
    double total = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - top);
      total += o[c];
    }
    for (double& v : o) v /= total;
  }
  return out;
}

}  // namespace rnnsec
