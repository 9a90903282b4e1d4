#pragma once

#include <cstdint>
#include <variant>

#include "fatigue/conv.hpp"
#include "fatigue/feature_map.hpp"

namespace fatigue {

// flop_count counts one multiply-accumulate as 2 FLOPs. Bias adds are 1 FLOP
// each; global average pooling is H*W adds plus one divide per channel.
struct LayerAccounting {
  std::uint64_t param_count = 0;
  std::uint64_t flop_count = 0;

  LayerAccounting& operator+=(const LayerAccounting& o) {
    param_count += o.param_count;
    flop_count += o.flop_count;
    return *this;
  }
  friend LayerAccounting operator+(LayerAccounting a, const LayerAccounting& b) { return a += b; }
  friend bool operator==(const LayerAccounting&, const LayerAccounting&) = default;
};

struct FcSpec {
  std::uint64_t in_features = 0;
  std::uint64_t out_features = 0;
};

struct GapSpec {};

using LayerSpec = std::variant<ConvSpec, FcSpec, GapSpec>;

inline LayerAccounting count_params_flops(const ConvSpec& spec, const Shape3& input) {
  spec.validate();
  if (input.channels != spec.in_channels) {
    detail::reject("accounting: input has ", input.channels, " channels, spec expects ",
                   spec.in_channels);
  }
  const Shape3 out = spec.output_shape(input);
  const std::uint64_t taps = spec.kernel_size * spec.kernel_size;
  const std::uint64_t positions = static_cast<std::uint64_t>(out.height) * out.width;
  const std::uint64_t params = spec.weight_count();
  // Each output position touches every weight exactly once (border taps of
  // same-padded maps multiply zeros and are still counted, as is customary).
  std::uint64_t macs = 0;
  switch (spec.kind) {
    case ConvKind::depthwise: macs = positions * taps * spec.in_channels; break;
    case ConvKind::standard:
    case ConvKind::pointwise:
      macs = positions * taps * spec.in_channels * spec.out_channels;
      break;
  }
  return {params, 2 * macs};
}

inline LayerAccounting count_params_flops(const FcSpec& spec, const Shape3& = {}) {
  const std::uint64_t macs = spec.in_features * spec.out_features;
  return {macs + spec.out_features, 2 * macs + spec.out_features};
}

inline LayerAccounting count_params_flops(const GapSpec&, const Shape3& input) {
  const std::uint64_t positions = static_cast<std::uint64_t>(input.height) * input.width;
  return {0, input.channels * (positions + 1)};
}

inline LayerAccounting count_params_flops(const LayerSpec& spec, const Shape3& input) {
  return std::visit([&](const auto& s) { return count_params_flops(s, input); }, spec);
}

// Depthwise-separable replacement for a standard conv: DWC(Dk, M) + PWC(M, N).
inline LayerAccounting count_separable(std::size_t kernel_size, std::size_t in_channels,
                                       std::size_t out_channels, const Shape3& input,
                                       Padding padding = Padding::same) {
  const auto dw = ConvSpec::depthwise(kernel_size, in_channels, padding);
  const Shape3 mid = dw.output_shape(input);
  return count_params_flops(dw, input) +
         count_params_flops(ConvSpec::pointwise(in_channels, out_channels), mid);
}

// Output head over a final H x W x C map.
struct HeadConfig {
  Shape3 feature_map{3, 3, 32};
  std::uint64_t units = 128;
};

struct HeadComparison {
  LayerAccounting fc_head;     // FC over the flattened map
  LayerAccounting gap;         // the pooling layer alone
  LayerAccounting gap_dense;   // C -> units dense layer after pooling
  LayerAccounting gap_path() const { return gap + gap_dense; }
};

inline HeadComparison compare_heads(const HeadConfig& cfg) {
  const Shape3& s = cfg.feature_map;
  if (s.size() == 0 || cfg.units == 0) detail::reject("head config must be non-empty");
  return {count_params_flops(FcSpec{s.size(), cfg.units}),
          count_params_flops(GapSpec{}, s),
          count_params_flops(FcSpec{s.channels, cfg.units})};
}

}  // namespace fatigue
