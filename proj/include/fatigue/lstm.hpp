#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "fatigue/errors.hpp"
#include "fatigue/losses.hpp"
#include "fatigue/nn.hpp"
#include "fatigue/sequence.hpp"

namespace fatigue {

inline constexpr std::size_t kFeatureSize = FatigueFeatureVector::kSize;
inline constexpr std::size_t kDefaultHidden = 32;
inline constexpr double kForgetBiasInit = 1.0;
inline constexpr double kDecisionThreshold = 0.5;

enum Gate : std::size_t { kInput = 0, kForget = 1, kOutput = 2, kCandidate = 3 };
inline constexpr std::array<const char*, 4> kGateNames = {"i", "f", "o", "g"};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Single-layer LSTM with a logistic head on the last hidden state.
//
// Gate weights are stored stacked: block gate*H .. gate*H+H-1 of `weights`
// holds W_gate (H x (I + H), row-major) acting on the concatenation [x; h].
struct LstmModel {
  std::size_t input_size = kFeatureSize;
  std::size_t hidden_size = kDefaultHidden;
  std::vector<double> weights;  // 4H x (I + H)
  std::vector<double> bias;     // 4H
  std::vector<double> head_w;   // H
  double head_b = 0.0;

  static LstmModel zeros(std::size_t hidden, std::size_t input = kFeatureSize) {
    if (hidden == 0 || input == 0) detail::reject("LSTM sizes must be positive");
    LstmModel m;
    m.input_size = input;
    m.hidden_size = hidden;
    m.weights.assign(4 * hidden * (input + hidden), 0.0);
    m.bias.assign(4 * hidden, 0.0);
    m.head_w.assign(hidden, 0.0);
    return m;
  }

  // Glorot-uniform weights, zero biases except the forget gate (+1).
  template <typename Rng>
  static LstmModel initialized(std::size_t hidden, Rng& rng, std::size_t input = kFeatureSize) {
    LstmModel m = zeros(hidden, input);
    const std::size_t cols = input + hidden;
    for (std::size_t g = 0; g < 4; ++g) {
      auto block = glorot_uniform<double>(hidden * cols, cols, hidden, rng);
      std::copy(block.begin(), block.end(), m.weights.begin() + static_cast<std::ptrdiff_t>(g * hidden * cols));
    }
    std::fill_n(m.bias.begin() + static_cast<std::ptrdiff_t>(kForget * hidden), hidden, kForgetBiasInit);
    m.head_w = glorot_uniform<double>(hidden, hidden, 1, rng);
    return m;
  }

  std::size_t concat_size() const { return input_size + hidden_size; }
  std::size_t parameter_count() const {
    return weights.size() + bias.size() + head_w.size() + 1;
  }

  std::span<double> gate_weights(Gate g) {
    return std::span<double>(weights).subspan(g * hidden_size * concat_size(), hidden_size * concat_size());
  }
  std::span<const double> gate_weights(Gate g) const {
    return std::span<const double>(weights).subspan(g * hidden_size * concat_size(),
                                                    hidden_size * concat_size());
  }
  std::span<double> gate_bias(Gate g) {
    return std::span<double>(bias).subspan(g * hidden_size, hidden_size);
  }
  std::span<const double> gate_bias(Gate g) const {
    return std::span<const double>(bias).subspan(g * hidden_size, hidden_size);
  }

  void check() const {
    if (weights.size() != 4 * hidden_size * concat_size() || bias.size() != 4 * hidden_size ||
        head_w.size() != hidden_size) {
      detail::reject("LSTM parameter shapes inconsistent with hidden size ", hidden_size);
    }
  }

  // Applies f(span<double>) to each parameter tensor; head_b is a 1-span.
  template <typename F>
  void for_each_tensor(F&& f) {
    f(std::span<double>(weights));
    f(std::span<double>(bias));
    f(std::span<double>(head_w));
    f(std::span<double>(&head_b, 1));
  }

  friend bool operator==(const LstmModel&, const LstmModel&) = default;
};

struct CellState {
  std::vector<double> h;
  std::vector<double> c;
};

// Everything backward needs from one forward step.
struct CellCache {
  std::vector<double> xh;      // [x; h_prev]
  std::vector<double> c_prev;
  std::vector<double> gates;   // i, f, o, g activations, 4H
  std::vector<double> c;
  std::vector<double> tanh_c;
};

namespace detail {

inline void cell_step(std::span<const double> x, std::span<const double> h,
                      std::span<const double> c, const LstmModel& m, CellCache& cache,
                      std::span<double> h_out) {
  const std::size_t H = m.hidden_size;
  const std::size_t I = m.input_size;
  const std::size_t cols = I + H;
  cache.xh.resize(cols);
  std::copy(x.begin(), x.end(), cache.xh.begin());
  std::copy(h.begin(), h.end(), cache.xh.begin() + static_cast<std::ptrdiff_t>(I));
  cache.c_prev.assign(c.begin(), c.end());
  cache.gates.resize(4 * H);
  const double* w = m.weights.data();
  for (std::size_t r = 0; r < 4 * H; ++r) {
    const double* row = w + r * cols;
    double z = m.bias[r];
    for (std::size_t j = 0; j < cols; ++j) z += row[j] * cache.xh[j];
    cache.gates[r] = r < 3 * H ? sigmoid(z) : std::tanh(z);
  }
  cache.c.resize(H);
  cache.tanh_c.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    const double i = cache.gates[j], f = cache.gates[H + j], o = cache.gates[2 * H + j],
                 g = cache.gates[3 * H + j];
    cache.c[j] = f * c[j] + i * g;
    cache.tanh_c[j] = std::tanh(cache.c[j]);
    h_out[j] = o * cache.tanh_c[j];
  }
}

inline void check_cell_args(std::span<const double> x, std::span<const double> h,
                            std::span<const double> c, const LstmModel& m) {
  m.check();
  if (x.size() != m.input_size || h.size() != m.hidden_size || c.size() != m.hidden_size) {
    reject("LSTM cell: x/h/c sizes ", x.size(), "/", h.size(), "/", c.size(), " vs model ",
           m.input_size, "/", m.hidden_size);
  }
}

}  // namespace detail

// i, f, o = sigmoid(W [x; h] + b); g = tanh(W_g [x; h] + b_g)
// c' = f * c + i * g;  h' = o * tanh(c')
inline CellState lstm_cell_forward(std::span<const double> x, std::span<const double> h,
                                   std::span<const double> c, const LstmModel& model,
                                   CellCache* cache = nullptr) {
  detail::check_cell_args(x, h, c, model);
  CellCache local;
  CellCache& cc = cache ? *cache : local;
  CellState out{std::vector<double>(model.hidden_size), {}};
  detail::cell_step(x, h, c, model, cc, out.h);
  out.c = cc.c;
  return out;
}

struct CellGrads {
  std::vector<double> x;
  std::vector<double> h_prev;
  std::vector<double> c_prev;
};

// Given dL/dh' and dL/dc' for one step, accumulates parameter gradients
// into `grads` (same shapes as the model) and returns the input gradients.
inline CellGrads lstm_cell_backward(const CellCache& cache, std::span<const double> dh,
                                    std::span<const double> dc, const LstmModel& model,
                                    LstmModel& grads) {
  const std::size_t H = model.hidden_size;
  const std::size_t I = model.input_size;
  const std::size_t cols = I + H;
  if (cache.gates.size() != 4 * H) throw StateError("LSTM cell backward called before forward");
  if (dh.size() != H || dc.size() != H) detail::reject("LSTM cell backward: gradient sizes");
  std::vector<double> dz(4 * H);
  CellGrads out{std::vector<double>(I, 0.0), std::vector<double>(H, 0.0), std::vector<double>(H)};
  for (std::size_t j = 0; j < H; ++j) {
    const double i = cache.gates[j], f = cache.gates[H + j], o = cache.gates[2 * H + j],
                 g = cache.gates[3 * H + j];
    const double tc = cache.tanh_c[j];
    const double dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
    dz[j] = dct * g * i * (1.0 - i);
    dz[H + j] = dct * cache.c_prev[j] * f * (1.0 - f);
    dz[2 * H + j] = dh[j] * tc * o * (1.0 - o);
    dz[3 * H + j] = dct * i * (1.0 - g * g);
    out.c_prev[j] = dct * f;
  }
  std::vector<double> dxh(cols, 0.0);
  for (std::size_t r = 0; r < 4 * H; ++r) {
    const double d = dz[r];
    grads.bias[r] += d;
    const double* row = model.weights.data() + r * cols;
    double* grow = grads.weights.data() + r * cols;
    for (std::size_t k = 0; k < cols; ++k) {
      grow[k] += d * cache.xh[k];
      dxh[k] += row[k] * d;
    }
  }
  std::copy_n(dxh.begin(), I, out.x.begin());
  std::copy(dxh.begin() + static_cast<std::ptrdiff_t>(I), dxh.end(), out.h_prev.begin());
  return out;
}

namespace detail {
inline void check_sample(const SequenceSample& s, const LstmModel& m) {
  if (s.cols == 0 || s.matrix.empty()) reject("cannot score an empty sequence");
  if (s.matrix.size() != SequenceSample::kRows * s.cols) {
    reject("sequence matrix has ", s.matrix.size(), " values for 4 x ", s.cols);
  }
  if (m.input_size != SequenceSample::kRows) {
    reject("model input size ", m.input_size, " does not match 4 feature rows");
  }
}

// Unrolls the cell over all columns from zero state; returns the head logit.
inline double unroll(const SequenceSample& s, const LstmModel& m, std::vector<CellCache>* caches,
                     std::vector<double>& h) {
  const std::size_t H = m.hidden_size;
  h.assign(H, 0.0);
  std::vector<double> c(H, 0.0), h_next(H);
  std::array<double, SequenceSample::kRows> x{};
  CellCache scratch;
  if (caches) caches->resize(s.cols);
  for (std::size_t t = 0; t < s.cols; ++t) {
    for (std::size_t r = 0; r < x.size(); ++r) x[r] = s.matrix[r * s.cols + t];
    CellCache& cc = caches ? (*caches)[t] : scratch;
    cell_step(x, h, c, m, cc, h_next);
    h.swap(h_next);
    c = cc.c;
  }
  double logit = m.head_b;
  for (std::size_t j = 0; j < H; ++j) logit += m.head_w[j] * h[j];
  return logit;
}
}  // namespace detail

// Probability that the sequence is a fatigue sample.
inline double sequence_forward(const SequenceSample& sample, const LstmModel& model) {
  model.check();
  detail::check_sample(sample, model);
  std::vector<double> h;
  return sigmoid(detail::unroll(sample, model, nullptr, h));
}

// Backpropagation through time for weight * BCE(sigmoid(logit), label).
// Accumulates into `grads`; returns the (weighted) loss.
inline double sequence_loss_backward(const SequenceSample& sample, const LstmModel& model,
                                     LstmModel& grads, double weight = 1.0) {
  detail::check_sample(sample, model);
  std::vector<CellCache> caches;
  std::vector<double> h;
  const double logit = detail::unroll(sample, model, &caches, h);
  const double p = sigmoid(logit);
  const double loss = weight * binary_cross_entropy(p, sample.label);
  const double dlogit = weight * (p - static_cast<double>(sample.label));
  const std::size_t H = model.hidden_size;
  grads.head_b += dlogit;
  std::vector<double> dh(H), dc(H, 0.0);
  for (std::size_t j = 0; j < H; ++j) {
    grads.head_w[j] += dlogit * h[j];
    dh[j] = dlogit * model.head_w[j];
  }
  for (std::size_t t = sample.cols; t-- > 0;) {
    auto g = lstm_cell_backward(caches[t], dh, dc, model, grads);
    dh.swap(g.h_prev);
    dc.swap(g.c_prev);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;
  double train_fraction = 0.8;   // rest is the validation split
  std::size_t hidden_size = kDefaultHidden;
  bool class_weighting = true;   // inverse-frequency sample weights
  bool keep_best = true;         // return the epoch with the lowest validation loss
  std::size_t threads = 1;       // fan-out for per-sample gradients

  void validate() const {
    if (learning_rate < 0.0 || momentum < 0.0 || momentum >= 1.0) {
      detail::reject("learning rate must be >= 0 and momentum in [0,1)");
    }
    if (batch_size == 0 || hidden_size == 0 || threads == 0) {
      detail::reject("batch size, hidden size and threads must be positive");
    }
    if (!(clip_norm > 0.0)) detail::reject("gradient clip norm must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      detail::reject("train fraction must lie in (0,1), got ", train_fraction);
    }
  }
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  double validation_accuracy = 0.0;
};

struct EvalResult {
  std::size_t total = 0;
  std::size_t true_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
  double mean_loss = 0.0;

  double accuracy() const {
    return total == 0 ? 0.0 : static_cast<double>(true_positive + true_negative) / static_cast<double>(total);
  }
  std::size_t positives() const { return true_positive + false_negative; }
  std::size_t negatives() const { return true_negative + false_positive; }
};

inline EvalResult evaluate_scores(std::span<const double> probabilities, std::span<const int> labels,
                                  double threshold = kDecisionThreshold) {
  if (probabilities.size() != labels.size()) detail::reject("scores and labels differ in length");
  EvalResult r;
  r.total = labels.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probabilities[i] >= threshold;
    const bool actual = labels[i] == 1;
    loss += binary_cross_entropy(probabilities[i], labels[i]);
    if (predicted && actual) ++r.true_positive;
    else if (!predicted && !actual) ++r.true_negative;
    else if (predicted) ++r.false_positive;
    else ++r.false_negative;
  }
  r.mean_loss = r.total ? loss / static_cast<double>(r.total) : 0.0;
  return r;
}

inline EvalResult evaluate(const LstmModel& model, std::span<const SequenceSample> dataset,
                           double threshold = kDecisionThreshold) {
  if (dataset.empty()) detail::reject("cannot evaluate on an empty dataset");
  std::vector<double> probs;
  std::vector<int> labels;
  probs.reserve(dataset.size());
  for (const auto& s : dataset) {
    probs.push_back(sequence_forward(s, model));
    labels.push_back(s.label);
  }
  return evaluate_scores(probs, labels, threshold);
}

struct TrainResult {
  LstmModel model;
  std::vector<EpochStats> history;
  std::size_t train_samples = 0;
  std::size_t validation_samples = 0;
  std::size_t best_epoch = 0;  // 0 = the initial model
};

namespace detail {

inline void add_into(LstmModel& acc, const LstmModel& g) {
  for (std::size_t i = 0; i < acc.weights.size(); ++i) acc.weights[i] += g.weights[i];
  for (std::size_t i = 0; i < acc.bias.size(); ++i) acc.bias[i] += g.bias[i];
  for (std::size_t i = 0; i < acc.head_w.size(); ++i) acc.head_w[i] += g.head_w[i];
  acc.head_b += g.head_b;
}

inline void zero(LstmModel& m) {
  m.for_each_tensor([](std::span<double> t) { std::fill(t.begin(), t.end(), 0.0); });
}

// Per-sample gradients are computed independently (optionally on several
// threads) and summed in sample order, so the result does not depend on the
// thread count.
inline double batch_gradient(const LstmModel& model, std::span<const SequenceSample> data,
                             std::span<const std::size_t> batch, std::span<const double> weights,
                             std::size_t threads, LstmModel& total) {
  std::vector<LstmModel> per(batch.size(), LstmModel::zeros(model.hidden_size, model.input_size));
  std::vector<double> losses(batch.size(), 0.0);
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t b = lo; b < hi; ++b) {
      const std::size_t idx = batch[b];
      losses[b] = sequence_loss_backward(data[idx], model, per[b], weights[idx]);
    }
  };
  const std::size_t n_threads = std::min(threads, batch.size());
  if (n_threads <= 1) {
    work(0, batch.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (batch.size() + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      const std::size_t lo = t * chunk, hi = std::min(batch.size(), lo + chunk);
      if (lo < hi) pool.emplace_back(work, lo, hi);
    }
  }
  zero(total);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    add_into(total, per[b]);
    loss += losses[b];
  }
  return loss;
}

inline double mean_loss(const LstmModel& model, std::span<const SequenceSample> data,
                        std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  double s = 0.0;
  for (auto i : idx) s += binary_cross_entropy(sequence_forward(data[i], model), data[i].label);
  return s / static_cast<double>(idx.size());
}

inline double accuracy(const LstmModel& model, std::span<const SequenceSample> data,
                       std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  std::size_t ok = 0;
  for (auto i : idx) {
    const int pred = sequence_forward(data[i], model) >= kDecisionThreshold ? 1 : 0;
    ok += pred == data[i].label ? 1 : 0;
  }
  return static_cast<double>(ok) / static_cast<double>(idx.size());
}

}  // namespace detail

// Mini-batch SGD with momentum on mean binary cross-entropy. Deterministic
// for a fixed seed regardless of the thread count.
inline TrainResult train(std::span<const SequenceSample> dataset, const TrainConfig& cfg) {
  cfg.validate();
  if (dataset.empty()) detail::reject("cannot train on an empty dataset");
  std::size_t positives = 0;
  for (const auto& s : dataset) {
    check_label(s.label);
    positives += static_cast<std::size_t>(s.label);
  }
  if (positives == 0 || positives == dataset.size()) {
    detail::reject("training data must contain both classes (", positives, " fatigue of ",
                   dataset.size(), ")");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(dataset.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, dataset.size());
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  std::vector<double> weights(dataset.size(), 1.0);
  if (cfg.class_weighting) {
    std::size_t pos = 0;
    for (auto i : train_idx) pos += static_cast<std::size_t>(dataset[i].label);
    const std::size_t neg = train_idx.size() - pos;
    if (pos > 0 && neg > 0) {
      const double n = static_cast<double>(train_idx.size());
      const double w_pos = n / (2.0 * static_cast<double>(pos));
      const double w_neg = n / (2.0 * static_cast<double>(neg));
      for (std::size_t i = 0; i < dataset.size(); ++i) weights[i] = dataset[i].label ? w_pos : w_neg;
    }
  }

  TrainResult result;
  result.model = LstmModel::initialized(cfg.hidden_size, rng);
  result.train_samples = train_idx.size();
  result.validation_samples = val_idx.size();

  LstmModel& model = result.model;
  LstmModel best = model;
  double best_val = detail::mean_loss(model, dataset, val_idx.empty() ? train_idx : val_idx);
  LstmModel velocity = LstmModel::zeros(cfg.hidden_size);
  LstmModel grad = LstmModel::zeros(cfg.hidden_size);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t lo = 0; lo < train_idx.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(train_idx.size(), lo + cfg.batch_size);
      std::span<const std::size_t> batch(train_idx.data() + lo, hi - lo);
      epoch_loss += detail::batch_gradient(model, dataset, batch, weights, cfg.threads, grad);
      const double scale = 1.0 / static_cast<double>(batch.size());
      double norm2 = 0.0;
      grad.for_each_tensor([&](std::span<double> t) {
        for (auto& v : t) {
          v *= scale;
          norm2 += v * v;
        }
      });
      const double norm = std::sqrt(norm2);
      const double clip = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;
      // v <- mu v + g;  p <- p - lr v
      std::array<std::span<double>, 4> p, v, g;
      std::size_t k = 0;
      model.for_each_tensor([&](std::span<double> t) { p[k++] = t; });
      k = 0;
      velocity.for_each_tensor([&](std::span<double> t) { v[k++] = t; });
      k = 0;
      grad.for_each_tensor([&](std::span<double> t) { g[k++] = t; });
      for (std::size_t t = 0; t < 4; ++t) {
        for (std::size_t i = 0; i < p[t].size(); ++i) {
          v[t][i] = cfg.momentum * v[t][i] + clip * g[t][i];
          p[t][i] -= cfg.learning_rate * v[t][i];
        }
      }
    }
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = epoch_loss / static_cast<double>(train_idx.size());
    const auto& monitor = val_idx.empty() ? train_idx : val_idx;
    st.validation_loss = detail::mean_loss(model, dataset, monitor);
    st.validation_accuracy = detail::accuracy(model, dataset, monitor);
    result.history.push_back(st);
    if (st.validation_loss < best_val) {
      best_val = st.validation_loss;
      best = model;
      result.best_epoch = epoch;
    }
  }
  if (cfg.keep_best) {
    model = best;
  } else {
    result.best_epoch = cfg.epochs;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Streaming inference
// ---------------------------------------------------------------------------

// Feeds per-frame vectors through a FIFO window; once the window is full,
// every push yields a probability. Warm-up pushes yield std::nullopt.
class StreamInferer {
 public:
  StreamInferer(LstmModel model, std::size_t window_len, std::size_t skip)
      : model_(std::move(model)), window_(window_len), skip_(skip) {
    model_.check();
  }

  std::optional<double> push(const FatigueFeatureVector& v) {
    window_.push(v);
    if (!window_.full()) return std::nullopt;
    return sequence_forward(as_matrix(window_, skip_), model_);
  }

  const FeatureWindow& window() const { return window_; }
  std::size_t skip() const { return skip_; }

 private:
  LstmModel model_;
  FeatureWindow window_;
  std::size_t skip_;
};

inline std::optional<double> stream_infer(const LstmModel& model, const FeatureWindow& window,
                                          std::size_t skip) {
  if (!window.full()) return std::nullopt;
  return sequence_forward(as_matrix(window, skip), model);
}

}  // namespace fatigue
