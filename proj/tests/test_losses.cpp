#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fatigue/losses.hpp"
#include "oracles.hpp"

using namespace fatigue;

namespace {

std::vector<Point> random_points(std::mt19937_64& rng) {
  auto v = oracle::random_vector(2 * kLandmarkCount, rng, 0.0, 400.0);
  std::vector<Point> pts(kLandmarkCount);
  for (std::size_t i = 0; i < kLandmarkCount; ++i) pts[i] = {v[2 * i], v[2 * i + 1]};
  return pts;
}

}  // namespace

TEST(LandmarkLoss, Examples) {
  std::mt19937_64 rng(1);
  auto a = oracle::random_vector(kLandmarkCoords, rng);
  EXPECT_EQ(landmark_loss(a, a), 0.0);
  auto b = a;
  for (auto& x : b) x += 1.0;
  EXPECT_NEAR(landmark_loss(a, b), 136.0, 1e-9);
  std::vector<double> short_vec(135);
  EXPECT_THROW(landmark_loss(short_vec, a), InputError);
}

TEST(LandmarkLoss, MatchesLoopOracleAndIsSymmetric) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    auto p = oracle::random_vector(kLandmarkCoords, rng, 0, 300);
    auto y = oracle::random_vector(kLandmarkCoords, rng, 0, 300);
    double want = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) want += (p[i] - y[i]) * (p[i] - y[i]);
    EXPECT_NEAR(landmark_loss(p, y), want, 1e-9 * want);
    EXPECT_EQ(landmark_loss(p, y), landmark_loss(y, p));
    EXPECT_GT(landmark_loss(p, y), 0.0);
  }
}

TEST(PoseLoss, Examples) {
  PoseAngles a{10, 20, 30};
  EXPECT_EQ(pose_loss(a, a), 0.0);
  EXPECT_DOUBLE_EQ(pose_loss({1, 2, 2}, {0, 0, 0}), 9.0);
  EXPECT_THROW(pose_loss({90, 0, 0}, a), InputError);
  EXPECT_THROW(pose_loss(a, {0, -95, 0}), InputError);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    auto v = oracle::random_vector(6, rng, -89, 89);
    PoseAngles p{v[0], v[1], v[2]}, q{v[3], v[4], v[5]};
    const double want = (v[0] - v[3]) * (v[0] - v[3]) + (v[1] - v[4]) * (v[1] - v[4]) + (v[2] - v[5]) * (v[2] - v[5]);
    EXPECT_NEAR(pose_loss(p, q), want, 1e-12 * want);
    EXPECT_EQ(pose_loss(p, q), pose_loss(q, p));
  }
}

TEST(TotalLoss, ExamplesAndLinearity) {
  EXPECT_DOUBLE_EQ(total_loss(2.0, 4.0), 1.5);
  EXPECT_EQ(total_loss(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(total_loss(7.0, 4.0, {0.0, 0.5}), 1.0);
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    auto v = oracle::random_vector(6, rng, 0, 10);
    LossWeights w{v[4], v[5]};
    EXPECT_NEAR(total_loss(v[0] + v[1], v[2], w), total_loss(v[0], v[2], w) + 0.5 * w.alpha * v[1], 1e-12);
    EXPECT_NEAR(total_loss(v[0], v[2] + v[3], w), total_loss(v[0], v[2], w) + 0.5 * w.beta * v[3], 1e-12);
  }
  EXPECT_THROW(total_loss(-1.0, 0.0), InputError);
}

TEST(BinaryCrossEntropy, Examples) {
  EXPECT_NEAR(binary_cross_entropy(1.0, 1), 0.0, 1e-11);
  EXPECT_NEAR(binary_cross_entropy(0.5, 1), std::log(2.0), 1e-12);
  EXPECT_NEAR(binary_cross_entropy(0.5, 0), std::log(2.0), 1e-12);
  EXPECT_TRUE(std::isfinite(binary_cross_entropy(0.0, 1)));
  EXPECT_TRUE(std::isfinite(binary_cross_entropy(1.0, 0)));
  EXPECT_THROW(binary_cross_entropy(0.5, 2), InputError);
  EXPECT_THROW(binary_cross_entropy(0.5, -1), InputError);
}

TEST(BinaryCrossEntropy, MonotoneInProbability) {
  double prev1 = binary_cross_entropy(0.001, 1), prev0 = binary_cross_entropy(0.001, 0);
  for (double p = 0.002; p < 0.999; p += 0.001) {
    const double l1 = binary_cross_entropy(p, 1), l0 = binary_cross_entropy(p, 0);
    EXPECT_LT(l1, prev1);
    EXPECT_GT(l0, prev0);
    EXPECT_GE(l1, 0.0);
    prev1 = l1;
    prev0 = l0;
  }
}

TEST(LossGradients, MatchFiniteDifferencesTightly) {
  std::mt19937_64 rng(5);
  // Central differences are exact on quadratics, so the square losses use a
  // coarse step that keeps cancellation in the large sums out of the check.
  const double coarse = 1e-2;
  for (int t = 0; t < 20; ++t) {
    auto p = oracle::random_vector(kLandmarkCoords, rng, 0, 300);
    auto y = oracle::random_vector(kLandmarkCoords, rng, 0, 300);
    auto num = oracle::numeric_gradient([&](const std::vector<double>& v) { return landmark_loss(v, y); }, p, coarse);
    EXPECT_LT(oracle::max_relative_error(landmark_loss_grad(p, y), num), 1e-6);

    auto a = oracle::random_vector(6, rng, -80, 80);
    auto pose = [](const std::vector<double>& v) { return PoseAngles{v[0], v[1], v[2]}; };
    std::vector<double> pa(a.begin(), a.begin() + 3);
    PoseAngles truth{a[3], a[4], a[5]};
    auto pg = pose_loss_grad(pose(pa), truth);
    auto pn = oracle::numeric_gradient([&](const std::vector<double>& v) { return pose_loss(pose(v), truth); }, pa, coarse);
    EXPECT_LT(oracle::max_relative_error({pg[0], pg[1], pg[2]}, pn), 1e-6);

    std::uniform_real_distribution<double> pd(0.01, 0.99);
    const double prob = pd(rng);
    for (int label : {0, 1}) {
      auto bn = oracle::numeric_gradient(
          [&](const std::vector<double>& v) { return binary_cross_entropy(v[0], label); }, {prob});
      EXPECT_LT(oracle::max_relative_error({binary_cross_entropy_grad(prob, label)}, bn), 1e-6);
    }

    auto tg = total_loss_grad();
    auto tn = oracle::numeric_gradient([&](const std::vector<double>& v) { return total_loss(v[0], v[1]); },
                                       {1.0 + a[0] * a[0], 1.0 + a[1] * a[1]});
    EXPECT_LT(oracle::max_relative_error({tg[0], tg[1]}, tn), 1e-6);
  }
}

TEST(NormalizedMeanError, Examples) {
  std::vector<Point> truth(kLandmarkCount);
  for (std::size_t i = 0; i < kLandmarkCount; ++i) truth[i] = {static_cast<double>(i), 50.0};
  truth[36] = {100, 100};
  truth[45] = {200, 100};
  std::vector<std::vector<Point>> t{truth};
  EXPECT_EQ(normalized_mean_error(t, t), 0.0);

  auto shifted = truth;
  for (auto& p : shifted) p.x += 5.0;
  std::vector<std::vector<Point>> s{shifted};
  EXPECT_NEAR(normalized_mean_error(s, t), 0.05, 1e-12);

  auto degenerate = truth;
  degenerate[45] = degenerate[36];
  std::vector<std::vector<Point>> d{degenerate};
  EXPECT_THROW(normalized_mean_error(s, d), InputError);
}

TEST(NormalizedMeanError, ScaleAndTranslationInvariant) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<Point>> preds, truths;
    for (int s = 0; s < 3; ++s) {
      preds.push_back(random_points(rng));
      truths.push_back(random_points(rng));
    }
    const double base = normalized_mean_error(preds, truths);
    auto u = oracle::random_vector(3, rng, 0.2, 5.0);
    auto transform = [&](std::vector<std::vector<Point>> v) {
      for (auto& sample : v)
        for (auto& p : sample) p = {u[0] * p.x + 17.0 * u[1], u[0] * p.y - 9.0 * u[2]};
      return v;
    };
    EXPECT_NEAR(normalized_mean_error(transform(preds), transform(truths)), base, 1e-12 * base + 1e-15);
  }
}

TEST(MeanAbsoluteError, Examples) {
  std::vector<double> p{5, -3}, t{3, -1};
  EXPECT_DOUBLE_EQ(mean_absolute_error(p, t), 2.0);
  EXPECT_EQ(mean_absolute_error(p, p), 0.0);
  EXPECT_THROW(mean_absolute_error(std::vector<double>{}, std::vector<double>{}), InputError);
  std::mt19937_64 rng(7);
  auto a = oracle::random_vector(50, rng, -80, 80), b = oracle::random_vector(50, rng, -80, 80);
  double want = 0.0;
  for (std::size_t i = 0; i < 50; ++i) want += std::abs(a[i] - b[i]);
  EXPECT_NEAR(mean_absolute_error(a, b), want / 50.0, 1e-12);

  std::vector<PoseAngles> pp{{5, 1, 0}, {-3, 2, 0}}, pt{{3, 1, 1}, {-1, 0, -1}};
  auto per_axis = mean_absolute_error(std::span<const PoseAngles>(pp), std::span<const PoseAngles>(pt));
  EXPECT_DOUBLE_EQ(per_axis[0], 2.0);
  EXPECT_DOUBLE_EQ(per_axis[1], 1.0);
  EXPECT_DOUBLE_EQ(per_axis[2], 1.0);
}

TEST(Perclos, ExamplesAndCountOracle) {
  std::vector<int> states(150, 1);
  for (int i = 0; i < 30; ++i) states[static_cast<std::size_t>(i * 5)] = 0;
  EXPECT_DOUBLE_EQ(perclos(states, 150), 0.2);
  EXPECT_EQ(perclos(std::vector<int>(150, 1), 150), 0.0);
  EXPECT_EQ(perclos(std::vector<int>(150, 0), 150), 1.0);
  EXPECT_THROW(perclos(states, 0), InputError);
  EXPECT_THROW(perclos(states, 151), InputError);

  std::mt19937_64 rng(8);
  std::bernoulli_distribution closed(0.3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> s(200);
    for (auto& v : s) v = closed(rng) ? 0 : 1;
    std::size_t count = 0;
    for (std::size_t i = 200 - 90; i < 200; ++i) count += s[i] == 0;
    EXPECT_EQ(perclos(s, 90), static_cast<double>(count) / 90.0);
  }
}
