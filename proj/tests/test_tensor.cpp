#include <gtest/gtest.h>

#include <random>

#include "fatigue/accounting.hpp"
#include "fatigue/conv.hpp"
#include "fatigue/nn.hpp"
#include "oracles.hpp"

using namespace fatigue;

namespace {

void expect_maps_near(const FeatureMap<double>& a, const FeatureMap<double>& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "at " << i;
}

std::vector<double> delta_kernels(std::size_t k, std::size_t channels) {
  std::vector<double> w(k * k * channels, 0.0);
  const std::size_t center = (k / 2) * k + k / 2;
  for (std::size_t c = 0; c < channels; ++c) w[center * channels + c] = 1.0;
  return w;
}

std::vector<double> identity_pointwise(std::size_t m) {
  std::vector<double> w(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) w[i * m + i] = 1.0;
  return w;
}

}  // namespace

TEST(ConvStandard, DotProductOnSinglePixel) {
  FeatureMap<double> in(Shape3{1, 1, 2}, {1.0, 2.0});
  auto out = conv_standard<double>(in, ConvSpec::standard(1, 2, 1), std::vector<double>{3.0, 4.0});
  ASSERT_EQ(out.shape(), (Shape3{1, 1, 1}));
  EXPECT_DOUBLE_EQ(out[0], 11.0);
}

TEST(ConvStandard, ZeroWeightsGiveZeroOutput) {
  std::mt19937_64 rng(3);
  auto in = oracle::random_map({5, 6, 3}, rng);
  auto spec = ConvSpec::standard(3, 3, 4, Padding::valid);
  auto out = conv_standard<double>(in, spec, std::vector<double>(spec.weight_count(), 0.0));
  ASSERT_EQ(out.shape(), (Shape3{3, 4, 4}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(ConvStandard, MatchesNaiveOracle) {
  std::mt19937_64 rng(11);
  auto in = oracle::random_map({5, 5, 3}, rng);
  auto spec = ConvSpec::standard(3, 3, 8);
  auto w = oracle::random_vector(spec.weight_count(), rng);
  expect_maps_near(conv_standard<double>(in, spec, w), oracle::conv_standard(in, 3, 8, 1, true, w), 1e-12);
}

TEST(ConvStandard, StrideAndValidPaddingShapes) {
  std::mt19937_64 rng(5);
  auto in = oracle::random_map({7, 8, 2}, rng);
  for (std::size_t stride : {1u, 2u, 3u}) {
    for (bool same : {true, false}) {
      auto spec = ConvSpec::standard(3, 2, 3, same ? Padding::same : Padding::valid, stride);
      auto w = oracle::random_vector(spec.weight_count(), rng);
      expect_maps_near(conv_standard<double>(in, spec, w), oracle::conv_standard(in, 3, 3, stride, same, w), 1e-12);
    }
  }
}

TEST(ConvStandard, RejectsShapeMismatchNamingDimensions) {
  FeatureMap<double> in(4, 4, 3);
  auto spec = ConvSpec::standard(3, 2, 4);
  try {
    conv_standard<double>(in, spec, std::vector<double>(spec.weight_count()));
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("3 channels"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("M=2"), std::string::npos) << e.what();
  }
  auto ok = ConvSpec::standard(3, 3, 4);
  EXPECT_THROW(conv_standard<double>(in, ok, std::vector<double>(5)), InputError);
}

TEST(ConvSpecTest, KindInvariants) {
  EXPECT_THROW((ConvSpec{3, 4, 4, 1, Padding::same, ConvKind::pointwise}.validate()), InputError);
  EXPECT_THROW((ConvSpec{3, 4, 5, 1, Padding::same, ConvKind::depthwise}.validate()), InputError);
  EXPECT_THROW((ConvSpec{2, 4, 4, 1, Padding::same, ConvKind::standard}.validate()), InputError);
  EXPECT_NO_THROW(ConvSpec::depthwise(5, 7).validate());
}

TEST(ConvDepthwise, DeltaKernelIsIdentityForAnyPadding) {
  std::mt19937_64 rng(21);
  for (std::size_t trial = 0; trial < 10; ++trial) {
    const std::size_t c = 1 + trial % 5;
    auto in = oracle::random_map({3 + trial % 4, 2 + trial % 5, c}, rng);
    auto out = conv_depthwise<double>(in, ConvSpec::depthwise(3, c), delta_kernels(3, c));
    EXPECT_EQ(out, in);
  }
  // valid padding crops the border but keeps the interior values
  auto in = oracle::random_map({6, 6, 2}, rng);
  auto out = conv_depthwise<double>(in, ConvSpec::depthwise(3, 2, Padding::valid), delta_kernels(3, 2));
  ASSERT_EQ(out.shape(), (Shape3{4, 4, 2}));
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x)
      for (std::size_t ch = 0; ch < 2; ++ch) EXPECT_EQ(out(y, x, ch), in(y + 1, x + 1, ch));
}

TEST(ConvDepthwise, SingleChannelEqualsStandard) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    auto in = oracle::random_map({5, 4, 1}, rng);
    auto w = oracle::random_vector(9, rng);
    EXPECT_EQ(conv_depthwise<double>(in, ConvSpec::depthwise(3, 1), w),
              conv_standard<double>(in, ConvSpec::standard(3, 1, 1), w));
  }
}

TEST(ConvDepthwise, MatchesPerChannelOracle) {
  std::mt19937_64 rng(13);
  auto in = oracle::random_map({4, 4, 2}, rng);
  auto w = oracle::random_vector(18, rng);
  expect_maps_near(conv_depthwise<double>(in, ConvSpec::depthwise(3, 2), w),
                   oracle::conv_depthwise(in, 3, 1, true, w), 1e-12);
}

TEST(ConvDepthwise, OutputChannelDependsOnlyOnItsInputChannel) {
  std::mt19937_64 rng(17);
  auto in = oracle::random_map({5, 5, 3}, rng);
  auto w = oracle::random_vector(27, rng);
  auto spec = ConvSpec::depthwise(3, 3);
  auto base = conv_depthwise<double>(in, spec, w);
  auto perturbed = in;
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 5; ++x) perturbed(y, x, 1) += 10.0;
  auto out = conv_depthwise<double>(perturbed, spec, w);
  for (std::size_t y = 0; y < 5; ++y)
    for (std::size_t x = 0; x < 5; ++x) {
      EXPECT_EQ(out(y, x, 0), base(y, x, 0));
      EXPECT_EQ(out(y, x, 2), base(y, x, 2));
      EXPECT_NE(out(y, x, 1), base(y, x, 1));
    }
}

TEST(ConvDepthwise, RejectsChannelMismatch) {
  FeatureMap<double> in(3, 3, 2);
  EXPECT_THROW(conv_depthwise<double>(in, ConvSpec::depthwise(3, 3), std::vector<double>(27)), InputError);
}

TEST(ConvPointwise, IdentityAndSmallExample) {
  std::mt19937_64 rng(2);
  auto in = oracle::random_map({3, 4, 5}, rng);
  EXPECT_EQ(conv_pointwise<double>(in, ConvSpec::pointwise(5, 5), identity_pointwise(5)), in);

  FeatureMap<double> px(Shape3{1, 1, 2}, {1.0, 2.0});
  auto out = conv_pointwise<double>(px, ConvSpec::pointwise(2, 2), std::vector<double>{1, 0, 0, 1});
  EXPECT_EQ(out.values(), (std::vector<double>{1.0, 2.0}));
}

TEST(ConvPointwise, MatchesPerPositionMatmul) {
  std::mt19937_64 rng(99);
  auto in = oracle::random_map({3, 3, 4}, rng);
  auto w = oracle::random_vector(24, rng);
  expect_maps_near(conv_pointwise<double>(in, ConvSpec::pointwise(4, 6), w), oracle::pointwise_matmul(in, 6, w), 1e-12);
  EXPECT_THROW(conv_pointwise<double>(in, ConvSpec::pointwise(4, 6), std::vector<double>(23)), InputError);
}

TEST(GlobalAveragePool, Means) {
  FeatureMap<double> m(Shape3{2, 2, 1}, {1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(global_average_pool(m)[0], 2.5);
  FeatureMap<double> constant(4, 3, 2, 1.75);
  EXPECT_EQ(global_average_pool(constant), (std::vector<double>{1.75, 1.75}));
  FeatureMap<double> single(Shape3{1, 1, 3}, {0.1, -2.0, 7.0});
  EXPECT_EQ(global_average_pool(single), (std::vector<double>{0.1, -2.0, 7.0}));
}

TEST(FullyConnected, Examples) {
  std::vector<double> x{0.5, -1.5};
  EXPECT_EQ(fully_connected<double>(x, std::vector<double>{1, 0, 0, 1}, std::vector<double>{0, 0}), x);
  EXPECT_EQ(fully_connected<double>(std::vector<double>{1, 1}, std::vector<double>{2, 3}, std::vector<double>{1}),
            (std::vector<double>{6.0}));
  EXPECT_THROW(fully_connected<double>(x, std::vector<double>{1, 2, 3}, std::vector<double>{0, 0}), InputError);
}

TEST(FullyConnected, MatchesNestedLoopOracle) {
  std::mt19937_64 rng(64);
  auto x = oracle::random_vector(64, rng);
  auto w = oracle::random_vector(64 * 128, rng);
  auto b = oracle::random_vector(128, rng);
  auto got = fully_connected<double>(x, w, b);
  auto want = oracle::dense(x, w, b);
  for (std::size_t i = 0; i < 128; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(LeakyReluTest, ScalarCases) {
  EXPECT_EQ(leaky_relu(3.0), 3.0);
  EXPECT_DOUBLE_EQ(leaky_relu(-2.0, 0.1), -0.2);
  EXPECT_EQ(leaky_relu(0.0), 0.0);
  EXPECT_EQ(leaky_relu_grad(3.0), 1.0);
  EXPECT_EQ(leaky_relu_grad(-1.0, 0.1), 0.1);
  FeatureMap<double> m(1, 1, 1);
  EXPECT_THROW(leaky_relu(m, 1.5), InputError);
}

TEST(ResidualAddTest, IdentityDoublingCommutativity) {
  std::mt19937_64 rng(4);
  auto a = oracle::random_map({3, 3, 2}, rng);
  auto b = oracle::random_map({3, 3, 2}, rng);
  EXPECT_EQ(residual_add(a, FeatureMap<double>(a.shape())), a);
  auto twice = residual_add(a, a);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(twice[i], 2.0 * a[i]);
  EXPECT_EQ(residual_add(a, b), residual_add(b, a));
  EXPECT_THROW(residual_add(a, FeatureMap<double>(3, 3, 3)), InputError);
}

TEST(FeatureUnitTest, ZeroBranchIsIdentity) {
  std::mt19937_64 rng(31);
  auto in = oracle::random_map({6, 5, 4}, rng);
  FeatureUnitParams<double> p{3, 4, std::vector<double>(36, 0.0), std::vector<double>(16, 0.0)};
  EXPECT_EQ(feature_unit_forward(in, p), in);
}

TEST(FeatureUnitTest, DeltaAndIdentityDoublesNonnegativeInput) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> pos(0.0, 2.0);
  FeatureMap<double> in(4, 4, 3);
  for (auto& v : in.data()) v = pos(rng);
  FeatureUnitParams<double> p{3, 3, delta_kernels(3, 3), identity_pointwise(3)};
  auto out = feature_unit_forward(in, p);
  for (std::size_t i = 0; i < in.size(); ++i) EXPECT_DOUBLE_EQ(out[i], 2.0 * in[i]);
}

TEST(FeatureUnitTest, EqualsHandComposedChain) {
  std::mt19937_64 rng(33);
  auto in = oracle::random_map({8, 8, 16}, rng);
  FeatureUnitParams<double> p{3, 16, oracle::random_vector(144, rng), oracle::random_vector(256, rng)};
  auto dw = oracle::conv_depthwise(in, 3, 1, true, p.depthwise);
  for (auto& v : dw.data()) v = v >= 0 ? v : 0.1 * v;
  auto pw = oracle::pointwise_matmul(dw, 16, p.pointwise);
  for (auto& v : pw.data()) v = v >= 0 ? v : 0.1 * v;
  for (std::size_t i = 0; i < pw.size(); ++i) pw[i] += in[i];
  expect_maps_near(feature_unit_forward(in, p), pw, 1e-12);

  FeatureUnit<double> unit(p);
  expect_maps_near(unit.forward(in), pw, 1e-12);
}

TEST(LayerState, BackwardBeforeForwardIsStateError) {
  std::mt19937_64 rng(1);
  auto conv = Conv2d<double>::glorot(ConvSpec::depthwise(3, 2), rng);
  EXPECT_THROW(conv.backward(FeatureMap<double>(2, 2, 2)), StateError);
  LeakyRelu<double> act;
  EXPECT_THROW(act.backward(FeatureMap<double>(1, 1, 1)), StateError);
  GlobalAvgPool<double> gap;
  std::vector<double> g{1.0};
  EXPECT_THROW(gap.backward(g), StateError);
  auto fc = FullyConnected<double>::glorot(3, 2, rng);
  EXPECT_THROW(fc.backward(std::vector<double>{1.0, 1.0}), StateError);
  ResidualAdd<double> add;
  EXPECT_THROW(add.backward(FeatureMap<double>(1, 1, 1)), StateError);
  auto unit = FeatureUnit<double>::glorot(3, 2, rng);
  EXPECT_THROW(unit.backward(FeatureMap<double>(2, 2, 2)), StateError);
}

TEST(LayerState, LeakyBackwardSlopes) {
  LeakyRelu<double> act(0.1);
  FeatureMap<double> x(Shape3{1, 1, 2}, {3.0, -1.0});
  act.forward(x);
  auto g = act.backward(FeatureMap<double>(Shape3{1, 1, 2}, {1.0, 1.0}));
  EXPECT_EQ(g[0], 1.0);
  EXPECT_DOUBLE_EQ(g[1], 0.1);
}

TEST(GlorotInit, WithinLimitAndSeeded) {
  std::mt19937_64 a(5), b(5);
  auto wa = glorot_uniform<double>(1000, 10, 20, a);
  auto wb = glorot_uniform<double>(1000, 10, 20, b);
  EXPECT_EQ(wa, wb);
  const double limit = std::sqrt(6.0 / 30.0);
  for (double v : wa) EXPECT_LE(std::abs(v), limit);
}

TEST(Accounting, SeparableVersusStandard) {
  const Shape3 in{16, 16, 16};
  auto sc = count_params_flops(ConvSpec::standard(3, 16, 32), in);
  auto dsc = count_separable(3, 16, 32, in);
  EXPECT_EQ(sc.param_count, 4608u);
  EXPECT_EQ(dsc.param_count, 656u);
  EXPECT_EQ(sc.param_count, oracle::enumerate_standard_params(3, 16, 32));
  EXPECT_EQ(dsc.param_count, oracle::enumerate_depthwise_params(3, 16) + oracle::enumerate_standard_params(1, 16, 32));
  EXPECT_EQ(sc.flop_count, 2u * 16 * 16 * 9 * 16 * 32);
  EXPECT_EQ(dsc.flop_count, 2u * 16 * 16 * (9 * 16 + 16 * 32));
}

TEST(Accounting, RatioIdentityHoldsForManyShapes) {
  // params(SC) / params(DSC) = Dk^2 N / (Dk^2 + N), cross-multiplied to stay exact.
  for (std::size_t k : {1u, 3u, 5u, 7u})
    for (std::size_t m : {1u, 3u, 16u, 64u})
      for (std::size_t n : {1u, 8u, 32u, 100u}) {
        const Shape3 in{8, 8, m};
        const auto sc = count_params_flops(ConvSpec::standard(k, m, n), in).param_count;
        const auto dsc = count_separable(k, m, n, in).param_count;
        EXPECT_EQ(sc * (k * k + n), dsc * (k * k * n)) << k << " " << m << " " << n;
      }
}

TEST(Accounting, FcAndGap) {
  auto fc = count_params_flops(FcSpec{288, 128});
  EXPECT_EQ(fc.param_count, 36992u);
  EXPECT_EQ(fc.param_count, oracle::enumerate_fc_params(288, 128));
  EXPECT_EQ(fc.flop_count, 2u * 288 * 128 + 128);
  for (Shape3 s : {Shape3{1, 1, 1}, Shape3{3, 3, 32}, Shape3{7, 5, 9}}) {
    auto gap = count_params_flops(LayerSpec{GapSpec{}}, s);
    EXPECT_EQ(gap.param_count, 0u);
    EXPECT_EQ(gap.flop_count, s.channels * (s.height * s.width + 1));
  }
}

TEST(Accounting, HeadComparisonDefaultAndDegenerate) {
  auto cmp = compare_heads({});
  EXPECT_EQ(cmp.fc_head.param_count, 36992u);
  EXPECT_EQ(cmp.gap.param_count, 0u);
  EXPECT_EQ(cmp.gap_dense.param_count, 32u * 128 + 128);
  EXPECT_LT(cmp.gap_path().flop_count, cmp.fc_head.flop_count);

  auto one = compare_heads({{1, 1, 32}, 128});
  EXPECT_EQ(one.fc_head.flop_count, one.gap_dense.flop_count);
  EXPECT_LE(one.gap_path().param_count, one.fc_head.param_count);
}
