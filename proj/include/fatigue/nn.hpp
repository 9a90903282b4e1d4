#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "fatigue/conv.hpp"
#include "fatigue/errors.hpp"
#include "fatigue/feature_map.hpp"

namespace fatigue {

inline constexpr double kDefaultLeakySlope = 0.1;

// ---------------------------------------------------------------------------
// Stateless kernels
// ---------------------------------------------------------------------------

template <typename T>
std::vector<T> global_average_pool(const FeatureMap<T>& input) {
  const std::size_t c = input.channels();
  const std::size_t positions = input.height() * input.width();
  std::vector<T> out(c, T{});
  auto d = input.data();
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t ch = 0; ch < c; ++ch) out[ch] += d[p * c + ch];
  }
  for (auto& v : out) v /= static_cast<T>(positions);
  return out;
}

template <typename T>
FeatureMap<T> global_average_pool_backward(const Shape3& input_shape,
                                           std::type_identity_t<std::span<const T>> grad_out) {
  if (grad_out.size() != input_shape.channels) {
    detail::reject("GAP backward: gradient has ", grad_out.size(), " entries, input has ",
                   input_shape.channels, " channels");
  }
  FeatureMap<T> g(input_shape);
  const T scale = T{1} / static_cast<T>(input_shape.height * input_shape.width);
  auto d = g.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = grad_out[i % input_shape.channels] * scale;
  return g;
}

// W is out x in, row-major.
template <typename T>
std::vector<T> fully_connected(std::type_identity_t<std::span<const T>> input,
                               std::type_identity_t<std::span<const T>> weights,
                               std::type_identity_t<std::span<const T>> bias) {
  const std::size_t out_dim = bias.size();
  if (out_dim == 0 || weights.size() != out_dim * input.size()) {
    detail::reject("fully connected: W has ", weights.size(), " entries, expected out(",
                   out_dim, ") x in(", input.size(), ")");
  }
  std::vector<T> out(bias.begin(), bias.end());
  for (std::size_t o = 0; o < out_dim; ++o) {
    const T* row = weights.data() + o * input.size();
    T acc{};
    for (std::size_t i = 0; i < input.size(); ++i) acc += row[i] * input[i];
    out[o] += acc;
  }
  return out;
}

template <typename T>
struct FcGrads {
  std::vector<T> input;
  std::vector<T> weights;
  std::vector<T> bias;
};

template <typename T>
FcGrads<T> fully_connected_backward(std::type_identity_t<std::span<const T>> input,
                                    std::type_identity_t<std::span<const T>> weights,
                                    std::type_identity_t<std::span<const T>> grad_out) {
  const std::size_t in_dim = input.size();
  if (weights.size() != grad_out.size() * in_dim) {
    detail::reject("fully connected backward: W has ", weights.size(), " entries, expected ",
                   grad_out.size(), " x ", in_dim);
  }
  FcGrads<T> g{std::vector<T>(in_dim, T{}), std::vector<T>(weights.size(), T{}),
               std::vector<T>(grad_out.begin(), grad_out.end())};
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    const T go = grad_out[o];
    for (std::size_t i = 0; i < in_dim; ++i) {
      g.input[i] += weights[o * in_dim + i] * go;
      g.weights[o * in_dim + i] = go * input[i];
    }
  }
  return g;
}

template <typename T>
constexpr T leaky_relu(T x, T alpha = T(kDefaultLeakySlope)) {
  return x >= T{} ? x : alpha * x;
}

template <typename T>
constexpr T leaky_relu_grad(T x, T alpha = T(kDefaultLeakySlope)) {
  return x >= T{} ? T{1} : alpha;
}

template <typename T>
FeatureMap<T> leaky_relu(const FeatureMap<T>& input, T alpha = T(kDefaultLeakySlope)) {
  if (!(alpha > T{} && alpha < T{1})) detail::reject("leaky slope must lie in (0,1), got ", alpha);
  FeatureMap<T> out = input;
  for (auto& v : out.data()) v = leaky_relu(v, alpha);
  return out;
}

template <typename T>
FeatureMap<T> leaky_relu_backward(const FeatureMap<T>& input, const FeatureMap<T>& grad_out,
                                  T alpha = T(kDefaultLeakySlope)) {
  if (input.shape() != grad_out.shape()) {
    detail::reject("leaky relu backward: gradient ", grad_out.shape(), " vs input ", input.shape());
  }
  FeatureMap<T> g = grad_out;
  auto x = input.data();
  auto d = g.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= leaky_relu_grad(x[i], alpha);
  return g;
}

// No implicit projection: the shortcut only joins identically shaped maps.
template <typename T>
FeatureMap<T> residual_add(const FeatureMap<T>& a, const FeatureMap<T>& b) {
  if (a.shape() != b.shape()) {
    detail::reject("residual add: shape mismatch ", a.shape(), " vs ", b.shape());
  }
  FeatureMap<T> out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

// Glorot-uniform fill in +-sqrt(6 / (fan_in + fan_out)).
template <typename T, typename Rng>
std::vector<T> glorot_uniform(std::size_t count, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<T> w(count);
  for (auto& v : w) v = static_cast<T>(dist(rng));
  return w;
}

// ---------------------------------------------------------------------------
// Layers that record their forward inputs so backward can run later.
// backward() before forward() throws StateError.
// ---------------------------------------------------------------------------

namespace detail {
template <typename V>
const V& recorded(const std::optional<V>& v, const char* layer) {
  if (!v) throw StateError(concat(layer, ": backward called before forward"));
  return *v;
}
}  // namespace detail

template <typename T>
class Conv2d {
 public:
  Conv2d(ConvSpec spec, std::vector<T> weights) : spec_(spec), weights_(std::move(weights)) {
    spec_.validate();
    if (weights_.size() != spec_.weight_count()) {
      detail::reject("conv layer: expected ", spec_.weight_count(), " weights, got ", weights_.size());
    }
  }

  template <typename Rng>
  static Conv2d glorot(ConvSpec spec, Rng& rng) {
    const std::size_t taps = spec.kernel_size * spec.kernel_size;
    const std::size_t fan_in = spec.kind == ConvKind::depthwise ? taps : taps * spec.in_channels;
    const std::size_t fan_out = spec.kind == ConvKind::depthwise ? taps : taps * spec.out_channels;
    return Conv2d(spec, glorot_uniform<T>(spec.weight_count(), fan_in, fan_out, rng));
  }

  FeatureMap<T> forward(const FeatureMap<T>& input) {
    auto out = conv_apply<T>(input, spec_, weights_);
    input_ = input;
    return out;
  }

  ConvGrads<T> backward(const FeatureMap<T>& grad_out) const {
    return conv_backward<T>(detail::recorded(input_, "conv"), spec_, weights_, grad_out);
  }

  const ConvSpec& spec() const { return spec_; }
  std::vector<T>& weights() { return weights_; }
  const std::vector<T>& weights() const { return weights_; }

 private:
  ConvSpec spec_;
  std::vector<T> weights_;
  std::optional<FeatureMap<T>> input_;
};

template <typename T>
class GlobalAvgPool {
 public:
  std::vector<T> forward(const FeatureMap<T>& input) {
    shape_ = input.shape();
    return global_average_pool(input);
  }
  FeatureMap<T> backward(std::span<const T> grad_out) const {
    return global_average_pool_backward<T>(detail::recorded(shape_, "global average pool"), grad_out);
  }

 private:
  std::optional<Shape3> shape_;
};

template <typename T>
class FullyConnected {
 public:
  FullyConnected(std::size_t in_dim, std::vector<T> weights, std::vector<T> bias)
      : in_dim_(in_dim), weights_(std::move(weights)), bias_(std::move(bias)) {
    if (in_dim_ == 0 || bias_.empty() || weights_.size() != in_dim_ * bias_.size()) {
      detail::reject("fully connected layer: W has ", weights_.size(), " entries for in ",
                     in_dim_, " x out ", bias_.size());
    }
  }

  template <typename Rng>
  static FullyConnected glorot(std::size_t in_dim, std::size_t out_dim, Rng& rng) {
    return FullyConnected(in_dim, glorot_uniform<T>(in_dim * out_dim, in_dim, out_dim, rng),
                          std::vector<T>(out_dim, T{}));
  }

  std::vector<T> forward(std::span<const T> input) {
    auto out = fully_connected<T>(input, weights_, bias_);
    input_.emplace(input.begin(), input.end());
    return out;
  }

  FcGrads<T> backward(std::span<const T> grad_out) const {
    return fully_connected_backward<T>(detail::recorded(input_, "fully connected"), weights_, grad_out);
  }

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return bias_.size(); }
  std::vector<T>& weights() { return weights_; }
  std::vector<T>& bias() { return bias_; }

 private:
  std::size_t in_dim_;
  std::vector<T> weights_;
  std::vector<T> bias_;
  std::optional<std::vector<T>> input_;
};

template <typename T>
class LeakyRelu {
 public:
  explicit LeakyRelu(T alpha = T(kDefaultLeakySlope)) : alpha_(alpha) {}

  FeatureMap<T> forward(const FeatureMap<T>& input) {
    auto out = leaky_relu(input, alpha_);
    input_ = input;
    return out;
  }
  FeatureMap<T> backward(const FeatureMap<T>& grad_out) const {
    return leaky_relu_backward(detail::recorded(input_, "leaky relu"), grad_out, alpha_);
  }
  T alpha() const { return alpha_; }

 private:
  T alpha_;
  std::optional<FeatureMap<T>> input_;
};

template <typename T>
class ResidualAdd {
 public:
  FeatureMap<T> forward(const FeatureMap<T>& a, const FeatureMap<T>& b) {
    auto out = residual_add(a, b);
    shape_ = a.shape();
    return out;
  }
  // d(a + b)/da = d(a + b)/db = I
  std::pair<FeatureMap<T>, FeatureMap<T>> backward(const FeatureMap<T>& grad_out) const {
    const Shape3& s = detail::recorded(shape_, "residual add");
    if (grad_out.shape() != s) detail::reject("residual backward: gradient ", grad_out.shape(), " vs ", s);
    return {grad_out, grad_out};
  }

 private:
  std::optional<Shape3> shape_;
};

// Minimum feature extraction unit:
//   out = x + lrelu(PWC(lrelu(DWC(x))))
// PWC maps M -> M so the shortcut joins equal shapes.
template <typename T>
struct FeatureUnitParams {
  std::size_t kernel_size = 3;
  std::size_t channels = 0;
  std::vector<T> depthwise;  // Dk x Dk x M
  std::vector<T> pointwise;  // 1 x 1 x M x M
  T alpha = T(kDefaultLeakySlope);

  ConvSpec depthwise_spec() const { return ConvSpec::depthwise(kernel_size, channels); }
  ConvSpec pointwise_spec() const { return ConvSpec::pointwise(channels, channels); }
};

template <typename T>
FeatureMap<T> feature_unit_forward(const FeatureMap<T>& input, const FeatureUnitParams<T>& p) {
  auto a = conv_depthwise<T>(input, p.depthwise_spec(), p.depthwise);
  auto b = leaky_relu(a, p.alpha);
  auto c = conv_pointwise<T>(b, p.pointwise_spec(), p.pointwise);
  auto d = leaky_relu(c, p.alpha);
  return residual_add(input, d);
}

template <typename T>
struct FeatureUnitGrads {
  FeatureMap<T> input;
  std::vector<T> depthwise;
  std::vector<T> pointwise;
};

template <typename T>
class FeatureUnit {
 public:
  explicit FeatureUnit(FeatureUnitParams<T> params)
      : params_(std::move(params)),
        dwc_(params_.depthwise_spec(), params_.depthwise),
        act1_(params_.alpha),
        pwc_(params_.pointwise_spec(), params_.pointwise),
        act2_(params_.alpha) {}

  template <typename Rng>
  static FeatureUnit glorot(std::size_t kernel_size, std::size_t channels, Rng& rng) {
    FeatureUnitParams<T> p;
    p.kernel_size = kernel_size;
    p.channels = channels;
    p.depthwise = Conv2d<T>::glorot(p.depthwise_spec(), rng).weights();
    p.pointwise = Conv2d<T>::glorot(p.pointwise_spec(), rng).weights();
    return FeatureUnit(std::move(p));
  }

  FeatureMap<T> forward(const FeatureMap<T>& input) {
    auto branch = act2_.forward(pwc_.forward(act1_.forward(dwc_.forward(input))));
    return add_.forward(input, branch);
  }

  FeatureUnitGrads<T> backward(const FeatureMap<T>& grad_out) const {
    auto [g_shortcut, g_branch] = add_.backward(grad_out);
    auto pw = pwc_.backward(act2_.backward(g_branch));
    auto dw = dwc_.backward(act1_.backward(pw.input));
    return {residual_add(g_shortcut, dw.input), std::move(dw.weights), std::move(pw.weights)};
  }

  const FeatureUnitParams<T>& params() const { return params_; }

 private:
  FeatureUnitParams<T> params_;
  Conv2d<T> dwc_;
  LeakyRelu<T> act1_;
  Conv2d<T> pwc_;
  LeakyRelu<T> act2_;
  ResidualAdd<T> add_;
};

}  // namespace fatigue
