#pragma once

// The classifier: a stack of Elman layers read at the last timestep, then
// batch norm, dropout, a dense projection and a sigmoid or softmax head.
// Includes mini-batch BPTT training, prediction, a whole-model finite
// difference gradient check, and binary persistence.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rnnsec/dataset.hpp"
#include "rnnsec/error.hpp"
#include "rnnsec/layers.hpp"
#include "rnnsec/objective.hpp"
#include "rnnsec/tensor.hpp"

namespace rnnsec {

inline constexpr std::size_t kMaxRecurrentLayers = 6;
inline constexpr std::size_t kMaxEpochs = 1000;

enum class HeadChoice { automatic, sigmoid, softmax };

inline std::string to_string(HeadChoice h) {
  switch (h) {
    case HeadChoice::automatic: return "auto";
    case HeadChoice::sigmoid: return "sigmoid";
    case HeadChoice::softmax: return "softmax";
  }
  return "auto";
}

inline HeadChoice parse_head_choice(std::string_view s) {
  if (s == "auto") return HeadChoice::automatic;
  if (s == "sigmoid") return HeadChoice::sigmoid;
  if (s == "softmax") return HeadChoice::softmax;
  throw ConfigError("unknown head '" + std::string(s) + "' (expected auto, sigmoid or softmax)");
}

struct TopologyConfig {
  std::size_t num_recurrent_layers = 1;
  std::size_t hidden_units = 768;
  double dropout_rate = 0.001;
  bool use_batchnorm = true;
  SequenceMode sequence_mode = SequenceMode::per_feature;
  HeadChoice head = HeadChoice::automatic;

  friend bool operator==(const TopologyConfig&, const TopologyConfig&) = default;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.0;
  std::size_t epochs = 700;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;
  bool shuffle = true;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
  double seconds = 0.0;
};

using TrainHistory = std::vector<EpochStats>;

inline void validate(const TopologyConfig& t) {
  if (t.num_recurrent_layers < 1 || t.num_recurrent_layers > kMaxRecurrentLayers) {
    throw ConfigError("topology: recurrent depth must be 1.." +
                      std::to_string(kMaxRecurrentLayers) + ", got " +
                      std::to_string(t.num_recurrent_layers));
  }
  if (t.hidden_units < 1) throw ConfigError("topology: hidden_units must be at least 1");
  if (!(t.dropout_rate >= 0.0 && t.dropout_rate < 1.0)) {
    throw ConfigError("topology: dropout rate must lie in [0, 1)");
  }
}

inline void validate(const TrainConfig& c) {
  if (c.epochs > kMaxEpochs) {
    throw ConfigError("train: epochs must not exceed " + std::to_string(kMaxEpochs));
  }
  if (c.batch_size < 2) throw ConfigError("train: batch_size must be at least 2");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate)) {
    throw ConfigError("train: learning rate must be finite and non-negative");
  }
  if (!(c.momentum >= 0.0)) throw ConfigError("train: momentum must be non-negative");
}

inline Head resolve_head(HeadChoice choice, std::size_t num_classes) {
  switch (choice) {
    case HeadChoice::automatic: return num_classes == 2 ? Head::sigmoid : Head::softmax;
    case HeadChoice::sigmoid:
      if (num_classes != 2) {
        throw ConfigError("sigmoid head requires 2 classes, data has " +
                          std::to_string(num_classes));
      }
      return Head::sigmoid;
    case HeadChoice::softmax: return Head::softmax;
  }
  return Head::softmax;
}

struct Model {
  TopologyConfig topology;
  std::size_t input_dim = 0;
  std::size_t num_classes = 2;
  Head head = Head::sigmoid;

  std::vector<RecurrentParams> recurrent;
  BatchNormParams batchnorm;
  DenseParams dense;

  Rng dropout_rng{0};
  std::vector<Matrix> velocity;  // one per trainable array

  std::size_t output_width() const noexcept { return head == Head::sigmoid ? 1 : num_classes; }

  // Trainable arrays in declaration order: for each recurrent layer
  // (w_in, w_rec, b), then (gamma, beta) when batch norm is on, then (w, b).
  std::vector<Matrix*> trainable() {
    std::vector<Matrix*> out;
    for (auto& layer : recurrent) {
      out.push_back(&layer.w_in);
      out.push_back(&layer.w_rec);
      out.push_back(&layer.b);
    }
    if (topology.use_batchnorm) {
      out.push_back(&batchnorm.gamma);
      out.push_back(&batchnorm.beta);
    }
    out.push_back(&dense.w);
    out.push_back(&dense.b);
    return out;
  }

  std::vector<const Matrix*> trainable() const {
    auto mut = const_cast<Model*>(this)->trainable();
    return {mut.begin(), mut.end()};
  }

  // Every persisted array, including batch-norm running statistics.
  std::vector<Matrix*> state_arrays() {
    std::vector<Matrix*> out;
    for (auto& layer : recurrent) {
      out.push_back(&layer.w_in);
      out.push_back(&layer.w_rec);
      out.push_back(&layer.b);
    }
    out.push_back(&batchnorm.gamma);
    out.push_back(&batchnorm.beta);
    out.push_back(&batchnorm.running_mean);
    out.push_back(&batchnorm.running_var);
    out.push_back(&dense.w);
    out.push_back(&dense.b);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Matrix* m : trainable()) n += m->size();
    return n;
  }
};

// Trainable scalar count of a topology without building it.
inline std::size_t parameter_count(const TopologyConfig& t, std::size_t input_dim,
                                   std::size_t num_classes) {
  const std::size_t h = t.hidden_units;
  const std::size_t step = step_width(t.sequence_mode, input_dim);
  std::size_t n = 0;
  for (std::size_t l = 0; l < t.num_recurrent_layers; ++l) {
    const std::size_t d = l == 0 ? step : h;
    n += h * d + h * h + h;
  }
  if (t.use_batchnorm) n += 2 * h;
  const std::size_t out = resolve_head(t.head, num_classes) == Head::sigmoid ? 1 : num_classes;
  n += out * h + out;
  return n;
}

namespace detail {

inline void glorot_fill(Matrix& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : m.data()) v = rng.uniform(-bound, bound);
}

}  // namespace detail

inline Model build_model(const TopologyConfig& topology, std::size_t input_dim,
                         std::size_t num_classes, std::uint64_t seed) {
  validate(topology);
  if (input_dim < 1) throw ConfigError("build_model: input_dim must be at least 1");
  if (num_classes < 2) throw ConfigError("build_model: num_classes must be at least 2");

  Model m;
  m.topology = topology;
  m.input_dim = input_dim;
  m.num_classes = num_classes;
  m.head = resolve_head(topology.head, num_classes);

  Rng rng(seed);
  m.dropout_rng = rng.split();

  const std::size_t h = topology.hidden_units;
  const std::size_t step = step_width(topology.sequence_mode, input_dim);
  for (std::size_t l = 0; l < topology.num_recurrent_layers; ++l) {
    const std::size_t d = l == 0 ? step : h;
    RecurrentParams p = RecurrentParams::zeros(d, h);
    detail::glorot_fill(p.w_in, d, h, rng);
    detail::glorot_fill(p.w_rec, h, h, rng);
    m.recurrent.push_back(std::move(p));
  }
  m.batchnorm = BatchNormParams::init(h);
  m.dense = DenseParams::zeros(h, m.output_width());
  detail::glorot_fill(m.dense.w, h, m.output_width(), rng);

  for (const Matrix* p : m.trainable()) m.velocity.emplace_back(p->rows(), p->cols());
  return m;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct ModelCache {
  Mode mode = Mode::infer;
  std::vector<RecurrentCache> recurrent;
  BatchNormCache batchnorm;
  Matrix dropout_mask;
  double dropout_rate = 0.0;
  Matrix dense_input;
};

struct ForwardResult {
  Matrix logits;
  Matrix probabilities;
  ModelCache cache;
};

namespace detail {

inline ForwardResult run_forward(const Model& m, const Matrix& batch, Mode mode,
                                 BatchNormParams& bn, Rng& dropout_rng, double dropout_rate) {
  if (batch.cols() != m.input_dim) {
    throw ShapeError("forward: batch " + batch.shape() + " for a model with input_dim " +
                     std::to_string(m.input_dim));
  }
  if (batch.rows() == 0) throw ArgumentError("forward: empty batch");
  ForwardResult out;
  out.cache.mode = mode;
  out.cache.recurrent.reserve(m.recurrent.size());

  const std::size_t steps = sequence_length(m.topology.sequence_mode, batch.cols());
  const std::size_t rows = batch.rows();
  const std::size_t hidden = m.topology.hidden_units;
  Matrix seq = encode_stacked(batch, m.topology.sequence_mode);
  const Matrix h0(rows, hidden);
  for (const RecurrentParams& layer : m.recurrent) {
    RecurrentCache c = rnn_forward_stacked(std::move(seq), steps, layer, h0);
    seq = c.hidden;
    out.cache.recurrent.push_back(std::move(c));
  }
  auto last = seq.data().subspan((steps - 1) * rows * hidden);
  Matrix features(rows, hidden, std::vector<double>(last.begin(), last.end()));

  if (m.topology.use_batchnorm) {
    BatchNormForward bnf = batchnorm_forward(features, bn, mode);
    features = std::move(bnf.out);
    out.cache.batchnorm = std::move(bnf.cache);
  }

  DropoutSpec spec{dropout_rate, dropout_rng};
  DropoutForward drop = dropout_forward(features, spec, mode);
  dropout_rng = spec.rng;
  out.cache.dropout_mask = std::move(drop.mask);
  out.cache.dropout_rate = dropout_rate;
  out.cache.dense_input = std::move(drop.out);

  out.logits = dense_forward(out.cache.dense_input, m.dense);
  out.probabilities = apply_head(out.logits, m.head);
  return out;
}

}  // namespace detail

// Train mode updates batch-norm running statistics and draws dropout masks
// from the model's generator.
inline ForwardResult forward(Model& model, const Matrix& batch, Mode mode) {
  if (mode == Mode::infer) {
    BatchNormParams bn = model.batchnorm;
    Rng unused(0);
    return detail::run_forward(model, batch, Mode::infer, bn, unused, 0.0);
  }
  return detail::run_forward(model, batch, Mode::train, model.batchnorm, model.dropout_rng,
                             model.topology.dropout_rate);
}

inline ForwardResult forward(const Model& model, const Matrix& batch) {
  BatchNormParams bn = model.batchnorm;
  Rng unused(0);
  return detail::run_forward(model, batch, Mode::infer, bn, unused, 0.0);
}

// Gradients of the loss for every trainable array, aligned with
// Model::trainable(). grad_logits is d loss / d logits.
inline std::vector<Matrix> backward(const Model& model, const ModelCache& cache,
                                    const Matrix& grad_logits) {
  if (cache.mode != Mode::train) {
    throw UsageError("backward: cache comes from an inference-mode forward pass");
  }
  DenseBackward dense = dense_backward(cache.dense_input, model.dense, grad_logits);
  Matrix grad = dropout_backward(dense.grad_input, cache.dropout_mask, cache.dropout_rate);

  Matrix grad_gamma, grad_beta;
  if (model.topology.use_batchnorm) {
    BatchNormBackward bn = batchnorm_backward(cache.batchnorm, model.batchnorm, grad);
    grad = std::move(bn.grad_input);
    grad_gamma = std::move(bn.grad_gamma);
    grad_beta = std::move(bn.grad_beta);
  }

  const std::size_t layers = model.recurrent.size();
  std::vector<RecurrentGrads> layer_grads(layers);
  const RecurrentCache& top = cache.recurrent.back();
  Matrix grad_seq(top.hidden.rows(), top.hidden.cols());
  std::copy(grad.data().begin(), grad.data().end(),
            grad_seq.data().begin() +
                static_cast<std::ptrdiff_t>((top.steps - 1) * top.batch * top.hidden.cols()));
  for (std::size_t l = layers; l-- > 0;) {
    RecurrentBackward rb =
        rnn_backward_stacked(cache.recurrent[l], model.recurrent[l], grad_seq, l > 0);
    layer_grads[l] = std::move(rb.grads);
    if (l > 0) grad_seq = std::move(rb.grad_inputs);
  }

  std::vector<Matrix> grads;
  for (auto& g : layer_grads) {
    grads.push_back(std::move(g.w_in));
    grads.push_back(std::move(g.w_rec));
    grads.push_back(std::move(g.b));
  }
  if (model.topology.use_batchnorm) {
    grads.push_back(std::move(grad_gamma));
    grads.push_back(std::move(grad_beta));
  }
  grads.push_back(std::move(dense.grads.w));
  grads.push_back(std::move(dense.grads.b));
  return grads;
}

// ---------------------------------------------------------------------------
// Prediction

struct Prediction {
  std::vector<int> labels;
  Matrix probabilities;
};

// Binary: 1 iff p >= 0.5. Multiclass: argmax, lowest index wins ties.
inline std::vector<int> labels_from_probabilities(const Matrix& probs, Head head) {
  std::vector<int> labels(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    if (head == Head::sigmoid) {
      labels[r] = probs(r, 0) >= 0.5 ? 1 : 0;
      continue;
    }
    auto row = probs.row(r);
    labels[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return labels;
}

inline Prediction predict(const Model& model, const Matrix& features) {
  ForwardResult f = forward(model, features);
  return {labels_from_probabilities(f.probabilities, model.head), std::move(f.probabilities)};
}

// Inference over a large matrix in fixed-size chunks.
inline Prediction predict_batched(const Model& model, const Matrix& features,
                                  std::size_t chunk = 1024) {
  Prediction out;
  out.probabilities = Matrix(features.rows(), model.output_width());
  out.labels.reserve(features.rows());
  for (std::size_t start = 0; start < features.rows(); start += chunk) {
    const std::size_t n = std::min(chunk, features.rows() - start);
    Matrix part(n, features.cols());
    for (std::size_t i = 0; i < n; ++i) {
      auto src = features.row(start + i);
      std::copy(src.begin(), src.end(), part.row(i).begin());
    }
    Prediction p = predict(model, part);
    out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    for (std::size_t i = 0; i < n; ++i) {
      auto src = p.probabilities.row(i);
      std::copy(src.begin(), src.end(), out.probabilities.row(start + i).begin());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace detail {

inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = x.row(idx[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

}  // namespace detail

inline TrainHistory train(Model& model, const Dataset& data, const TrainConfig& cfg) {
  validate(cfg);
  TrainHistory history;
  if (cfg.epochs == 0) return history;
  if (data.size() < 2) throw ArgumentError("train: need at least 2 samples");
  if (data.x.cols() != model.input_dim) {
    throw ShapeError("train: dataset has " + std::to_string(data.x.cols()) +
                     " features, model expects " + std::to_string(model.input_dim));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.y[i] < 0 || static_cast<std::size_t>(data.y[i]) >= model.num_classes) {
      throw DataError("train: sample " + std::to_string(i) + " has label " +
                      std::to_string(data.y[i]) + " outside [0, " +
                      std::to_string(model.num_classes) + ")");
    }
  }

  const SgdConfig sgd{cfg.learning_rate, cfg.momentum};
  Rng order_rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<Matrix*> params = model.trainable();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    if (cfg.shuffle) shuffle(order, order_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      if (n < 2) continue;
      std::span<const std::size_t> idx(order.data() + start, n);
      Matrix x = detail::gather_rows(data.x, idx);
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = data.y[idx[i]];

      ForwardResult f = forward(model, x, Mode::train);
      HeadLossGrad hl = head_loss_grad(f.logits, labels, model.head);
      if (!std::isfinite(hl.loss) || !all_finite(hl.probabilities)) {
        throw TrainingError("training diverged: non-finite loss at epoch " +
                            std::to_string(epoch + 1) + ", batch " +
                            std::to_string(batch_index + 1));
      }
      std::vector<Matrix> grads = backward(model, f.cache, hl.grad);
      for (std::size_t p = 0; p < params.size(); ++p) {
        sgd_step(*params[p], grads[p], sgd, model.velocity[p]);
      }

      loss_sum += hl.loss * static_cast<double>(n);
      seen += n;
      std::vector<int> predicted = labels_from_probabilities(hl.probabilities, model.head);
      for (std::size_t i = 0; i < n; ++i) correct += predicted[i] == labels[i];
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    const double denom = seen == 0 ? 1.0 : static_cast<double>(seen);
    history.push_back({loss_sum / denom, static_cast<double>(correct) / denom, elapsed.count()});
  }
  return history;
}

// ---------------------------------------------------------------------------
// Gradient check

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

struct GradientCheckOptions {
  double step = 1e-5;
  std::size_t full_check_limit = 2000;  // above this, sample coordinates
  std::size_t sampled_coordinates = 200;
  std::uint64_t sample_seed = 0;
};

// Max relative error between backprop gradients and central differences of
// the full composed loss. Dropout is disabled and batch norm uses batch
// statistics, so the loss is a deterministic function of the parameters.
inline double gradient_check(const Model& model, const Matrix& batch, std::span<const int> labels,
                             const GradientCheckOptions& opts = {}) {
  Model probe = model;
  probe.topology.dropout_rate = 0.0;

  auto loss_at = [&](Model& m) {
    ForwardResult f = forward(m, batch, Mode::train);
    return head_loss_grad(f.logits, labels, m.head).loss;
  };

  ForwardResult f = forward(probe, batch, Mode::train);
  HeadLossGrad hl = head_loss_grad(f.logits, labels, probe.head);
  std::vector<Matrix> analytic = backward(probe, f.cache, hl.grad);

  std::vector<Matrix*> params = probe.trainable();
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p]->size(); ++i) coords.emplace_back(p, i);
  if (coords.size() > opts.full_check_limit) {
    Rng rng(opts.sample_seed);
    shuffle(coords, rng);
    coords.resize(opts.sampled_coordinates);
  }

  double worst = 0.0;
  for (auto [p, i] : coords) {
    double& value = params[p]->data()[i];
    const double saved = value;
    value = saved + opts.step;
    const double plus = loss_at(probe);
    value = saved - opts.step;
    const double minus = loss_at(probe);
    value = saved;
    const double numeric = (plus - minus) / (2.0 * opts.step);
    worst = std::max(worst, relative_error(analytic[p].data()[i], numeric));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Persistence: magic, header fields, then every state array as
// (u32 rows, u32 cols, rows*cols little-endian f64).

inline constexpr char kModelMagic[8] = {'R', 'N', 'N', 'S', 'E', 'C', 'M', 'D'};
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace io {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}
inline void put_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 4);
}
inline void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }
inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void need(std::istream& in, const char* what) {
  if (!in) throw DataError(std::string("truncated model file while reading ") + what);
}
inline std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  need(in, "u64");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}
inline std::uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  need(in, "u32");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}
inline std::uint8_t get_u8(std::istream& in) {
  const int c = in.get();
  need(in, "u8");
  return static_cast<std::uint8_t>(c);
}
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

inline void put_matrix(std::ostream& out, const Matrix& m) {
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) put_f64(out, v);
}

inline Matrix get_matrix(std::istream& in) {
  const std::uint32_t rows = get_u32(in);
  const std::uint32_t cols = get_u32(in);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = get_f64(in);
  return m;
}

inline void check_magic(std::istream& in, const char (&magic)[8], const char* kind) {
  char got[8];
  in.read(got, 8);
  if (!in || !std::equal(got, got + 8, magic)) {
    throw DataError(std::string("not a ") + kind + " file (bad magic)");
  }
}

}  // namespace io

inline void write_model(std::ostream& out, const Model& model) {
  out.write(kModelMagic, 8);
  io::put_u32(out, kModelFormatVersion);
  const TopologyConfig& t = model.topology;
  io::put_u32(out, static_cast<std::uint32_t>(t.num_recurrent_layers));
  io::put_u32(out, static_cast<std::uint32_t>(t.hidden_units));
  io::put_f64(out, t.dropout_rate);
  io::put_u8(out, t.use_batchnorm ? 1 : 0);
  io::put_u8(out, t.sequence_mode == SequenceMode::per_feature ? 0 : 1);
  io::put_u8(out, static_cast<std::uint8_t>(t.head));
  io::put_u8(out, model.head == Head::sigmoid ? 0 : 1);
  io::put_u32(out, static_cast<std::uint32_t>(model.input_dim));
  io::put_u32(out, static_cast<std::uint32_t>(model.num_classes));
  io::put_f64(out, model.batchnorm.momentum);
  io::put_f64(out, model.batchnorm.epsilon);
  auto arrays = const_cast<Model&>(model).state_arrays();
  io::put_u64(out, arrays.size());
  for (const Matrix* m : arrays) io::put_matrix(out, *m);
}

inline Model read_model(std::istream& in) {
  io::check_magic(in, kModelMagic, "model");
  const std::uint32_t version = io::get_u32(in);
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version));
  }
  TopologyConfig t;
  t.num_recurrent_layers = io::get_u32(in);
  t.hidden_units = io::get_u32(in);
  t.dropout_rate = io::get_f64(in);
  t.use_batchnorm = io::get_u8(in) != 0;
  t.sequence_mode = io::get_u8(in) == 0 ? SequenceMode::per_feature : SequenceMode::single_step;
  const std::uint8_t head_choice = io::get_u8(in);
  if (head_choice > 2) throw DataError("model file: bad head choice");
  t.head = static_cast<HeadChoice>(head_choice);
  const Head head = io::get_u8(in) == 0 ? Head::sigmoid : Head::softmax;
  const std::size_t input_dim = io::get_u32(in);
  const std::size_t num_classes = io::get_u32(in);

  Model m = build_model(t, input_dim, num_classes, 0);
  if (m.head != head) throw DataError("model file: head does not match class count");
  m.batchnorm.momentum = io::get_f64(in);
  m.batchnorm.epsilon = io::get_f64(in);
  auto arrays = m.state_arrays();
  const std::uint64_t count = io::get_u64(in);
  if (count != arrays.size()) {
    throw DataError("model file declares " + std::to_string(count) + " arrays, topology needs " +
                    std::to_string(arrays.size()));
  }
  for (Matrix* target : arrays) {
    Matrix loaded = io::get_matrix(in);
    if (loaded.rows() != target->rows() || loaded.cols() != target->cols()) {
      throw DataError("model file: array " + loaded.shape() + " where " + target->shape() +
                      " was expected");
    }
    *target = std::move(loaded);
  }
  return m;
}

inline void save_model(const std::string& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_model(out, model);
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_model(in);
}

}  // namespace rnnsec
