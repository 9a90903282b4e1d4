#pragma once

#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "fatigue/errors.hpp"
#include "fatigue/feature_map.hpp"

namespace fatigue {

enum class Padding { same, valid };
enum class ConvKind { standard, depthwise, pointwise };

inline const char* to_string(ConvKind k) {
  switch (k) {
    case ConvKind::standard: return "standard";
    case ConvKind::depthwise: return "depthwise";
    case ConvKind::pointwise: return "pointwise";
  }
  return "?";
}

// Weight layouts (all row-major, output channel innermost):
//   standard  Dk x Dk x M x N   index ((ky * Dk + kx) * M + m) * N + n
//   depthwise Dk x Dk x M       index (ky * Dk + kx) * M + m
//   pointwise 1 x 1 x M x N     index m * N + n
struct ConvSpec {
  std::size_t kernel_size = 3;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t stride = 1;
  Padding padding = Padding::same;
  ConvKind kind = ConvKind::standard;

  static ConvSpec standard(std::size_t k, std::size_t m, std::size_t n,
                           Padding p = Padding::same, std::size_t stride = 1) {
    return {k, m, n, stride, p, ConvKind::standard};
  }
  static ConvSpec depthwise(std::size_t k, std::size_t m, Padding p = Padding::same,
                            std::size_t stride = 1) {
    return {k, m, m, stride, p, ConvKind::depthwise};
  }
  static ConvSpec pointwise(std::size_t m, std::size_t n, std::size_t stride = 1) {
    return {1, m, n, stride, Padding::valid, ConvKind::pointwise};
  }

  void validate() const {
    if (kernel_size == 0 || kernel_size % 2 == 0) {
      detail::reject("kernel size must be odd and positive, got ", kernel_size);
    }
    if (in_channels == 0 || out_channels == 0 || stride == 0) {
      detail::reject("channel counts and stride must be positive");
    }
    if (kind == ConvKind::pointwise && kernel_size != 1) {
      detail::reject("pointwise convolution requires kernel size 1, got ", kernel_size);
    }
    if (kind == ConvKind::depthwise && out_channels != in_channels) {
      detail::reject("depthwise convolution requires out_channels == in_channels (",
                     in_channels, "), got ", out_channels);
    }
  }

  std::size_t weight_count() const {
    const std::size_t taps = kernel_size * kernel_size;
    return kind == ConvKind::depthwise ? taps * in_channels : taps * in_channels * out_channels;
  }

  std::size_t pad() const { return padding == Padding::same ? (kernel_size - 1) / 2 : 0; }

  std::size_t out_extent(std::size_t in) const {
    if (padding == Padding::same) return (in + stride - 1) / stride;
    if (in < kernel_size) {
      detail::reject("valid convolution with kernel ", kernel_size, " on extent ", in);
    }
    return (in - kernel_size) / stride + 1;
  }

  Shape3 output_shape(const Shape3& in) const {
    return {out_extent(in.height), out_extent(in.width), out_channels};
  }
};

template <typename T>
struct ConvGrads {
  FeatureMap<T> input;
  std::vector<T> weights;
};

namespace detail {

template <typename T>
void check_conv_args(const FeatureMap<T>& input, const ConvSpec& spec, std::size_t n_weights,
                     ConvKind expected) {
  spec.validate();
  if (spec.kind != expected) {
    reject("expected a ", to_string(expected), " spec, got ", to_string(spec.kind));
  }
  if (input.channels() != spec.in_channels) {
    reject(to_string(spec.kind), " convolution: input has ", input.channels(),
           " channels, spec expects M=", spec.in_channels);
  }
  if (n_weights != spec.weight_count()) {
    reject(to_string(spec.kind), " convolution: expected ", spec.weight_count(),
           " weights (Dk=", spec.kernel_size, ", M=", spec.in_channels, ", N=",
           spec.out_channels, "), got ", n_weights);
  }
}

// Visits every (output, input, weight) index triple that contributes a
// multiply-accumulate. Padding taps are skipped, which is zero padding.
template <typename F>
void for_each_tap(const Shape3& in, const Shape3& out, const ConvSpec& spec, F&& f) {
  const std::size_t k = spec.kernel_size;
  const std::size_t pad = spec.pad();
  const std::size_t m_in = in.channels;
  const std::size_t n_out = out.channels;
  const bool depthwise = spec.kind == ConvKind::depthwise;
  for (std::size_t oy = 0; oy < out.height; ++oy) {
    for (std::size_t ox = 0; ox < out.width; ++ox) {
      const std::size_t out_base = (oy * out.width + ox) * n_out;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * spec.stride + ky) -
                                  static_cast<std::ptrdiff_t>(pad);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in.height)) continue;
        for (std::size_t kx = 0; kx < k; ++kx) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * spec.stride + kx) -
                                    static_cast<std::ptrdiff_t>(pad);
          if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(in.width)) continue;
          const std::size_t in_base =
              (static_cast<std::size_t>(iy) * in.width + static_cast<std::size_t>(ix)) * m_in;
          const std::size_t tap = ky * k + kx;
          if (depthwise) {
            for (std::size_t m = 0; m < m_in; ++m) {
              f(out_base + m, in_base + m, tap * m_in + m);
            }
          } else {
            for (std::size_t m = 0; m < m_in; ++m) {
              const std::size_t w_base = (tap * m_in + m) * n_out;
              for (std::size_t n = 0; n < n_out; ++n) f(out_base + n, in_base + m, w_base + n);
            }
          }
        }
      }
    }
  }
}

template <typename T>
FeatureMap<T> conv_forward(const FeatureMap<T>& input, const ConvSpec& spec,
                           std::type_identity_t<std::span<const T>> weights) {
  FeatureMap<T> out(spec.output_shape(input.shape()));
  auto in = input.data();
  auto o = out.data();
  for_each_tap(input.shape(), out.shape(), spec,
               [&](std::size_t oi, std::size_t ii, std::size_t wi) { o[oi] += in[ii] * weights[wi]; });
  return out;
}

template <typename T>
ConvGrads<T> conv_backward(const FeatureMap<T>& input, const ConvSpec& spec,
                           std::type_identity_t<std::span<const T>> weights, const FeatureMap<T>& grad_out) {
  const Shape3 out_shape = spec.output_shape(input.shape());
  if (grad_out.shape() != out_shape) {
    reject(to_string(spec.kind), " backward: upstream gradient is ", grad_out.shape(),
           ", forward output was ", out_shape);
  }
  ConvGrads<T> g{FeatureMap<T>(input.shape()), std::vector<T>(weights.size(), T{})};
  auto in = input.data();
  auto go = grad_out.data();
  auto gi = g.input.data();
  for_each_tap(input.shape(), out_shape, spec, [&](std::size_t oi, std::size_t ii, std::size_t wi) {
    gi[ii] += go[oi] * weights[wi];
    g.weights[wi] += go[oi] * in[ii];
  });
  return g;
}

}  // namespace detail

// Full cross-channel correlation; weights Dk x Dk x M x N.
template <typename T>
FeatureMap<T> conv_standard(const FeatureMap<T>& input, const ConvSpec& spec,
                            std::type_identity_t<std::span<const T>> weights) {
  detail::check_conv_args(input, spec, weights.size(), ConvKind::standard);
  return detail::conv_forward(input, spec, weights);
}

// One Dk x Dk kernel per channel; output channel c sees only input channel c.
template <typename T>
FeatureMap<T> conv_depthwise(const FeatureMap<T>& input, const ConvSpec& spec,
                             std::type_identity_t<std::span<const T>> weights) {
  detail::check_conv_args(input, spec, weights.size(), ConvKind::depthwise);
  return detail::conv_forward(input, spec, weights);
}

// 1 x 1 x M x N: a per-pixel N x M matrix product over the channel vector.
template <typename T>
FeatureMap<T> conv_pointwise(const FeatureMap<T>& input, const ConvSpec& spec,
                             std::type_identity_t<std::span<const T>> weights) {
  detail::check_conv_args(input, spec, weights.size(), ConvKind::pointwise);
  return detail::conv_forward(input, spec, weights);
}

template <typename T>
ConvGrads<T> conv_backward(const FeatureMap<T>& input, const ConvSpec& spec,
                           std::type_identity_t<std::span<const T>> weights, const FeatureMap<T>& grad_out) {
  detail::check_conv_args(input, spec, weights.size(), spec.kind);
  return detail::conv_backward(input, spec, weights, grad_out);
}

template <typename T>
FeatureMap<T> conv_apply(const FeatureMap<T>& input, const ConvSpec& spec,
                         std::type_identity_t<std::span<const T>> weights) {
  switch (spec.kind) {
    case ConvKind::standard: return conv_standard(input, spec, weights);
    case ConvKind::depthwise: return conv_depthwise(input, spec, weights);
    case ConvKind::pointwise: return conv_pointwise(input, spec, weights);
  }
  detail::reject("unknown convolution kind");
}

}  // namespace fatigue
