#include <gtest/gtest.h>

#include <random>

#include "fatigue/features.hpp"
#include "fatigue/scenario.hpp"
#include "oracles.hpp"

using namespace fatigue;

namespace {

LandmarkFrame frame_from(const FaceShape& shape, double pitch = 2.3) {
  LandmarkFrame f;
  f.points = face_template(shape);
  f.pose = {pitch, 0.0, 0.0};
  return f;
}

LandmarkFrame transformed(LandmarkFrame f, double scale, double dx, double dy) {
  for (auto& p : f.points) p = {p.x * scale + dx, p.y * scale + dy};
  return f;
}

}  // namespace

TEST(EyeRegion, Examples) {
  LandmarkFrame f;
  const std::array<Point, 6> eye{{{10, 15}, {15, 10}, {25, 10}, {30, 15}, {25, 20}, {15, 20}}};
  std::copy(eye.begin(), eye.end(), f.points.begin() + 36);
  EXPECT_EQ(eye_region(f, EyeSide::left, 0.0), (Box{10, 10, 30, 20}));
  EXPECT_EQ(eye_region(f, EyeSide::left, 0.25), (Box{5, 7.5, 35, 22.5}));

  // clipped at the origin
  for (auto& p : f.points) p = {p.x - 8.0, p.y - 8.0};
  auto clipped = eye_region(f, EyeSide::left, 0.25);
  EXPECT_EQ(clipped.x0, 0.0);
  EXPECT_EQ(clipped.y0, 0.0);

  LandmarkFrame degenerate;
  EXPECT_THROW(eye_region(degenerate, EyeSide::right), InputError);
  EXPECT_THROW(eye_region(f, EyeSide::left, -0.1), InputError);
}

TEST(EyeRegion, ContainsContour) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    LandmarkFrame f;
    auto v = oracle::random_vector(24, rng, 0.0, 500.0);
    for (std::size_t i = 0; i < 12; ++i) f.points[36 + i] = {v[2 * i], v[2 * i + 1]};
    for (auto side : {EyeSide::left, EyeSide::right}) {
      auto box = eye_region(f, side);
      for (const auto& p : eye_contour(f, side)) EXPECT_TRUE(box.contains(p));
    }
  }
}

TEST(EyeState, Examples) {
  auto open = frame_from({});
  EXPECT_NEAR(eye_aspect_ratio(open, EyeSide::left), 0.3, 1e-12);
  EXPECT_NEAR(face::kOpenEar, 0.3, 1e-12);
  EXPECT_EQ(eye_state(open, EyeSide::left), 1);
  EXPECT_EQ(eye_state(open, EyeSide::right), 1);

  auto shut = frame_from({0.0});
  EXPECT_EQ(eye_aspect_ratio(shut, EyeSide::left), 0.0);
  EXPECT_EQ(eye_state(shut, EyeSide::left), 0);

  // EAR exactly at the threshold counts as open
  const double ear = eye_aspect_ratio(open, EyeSide::right);
  EXPECT_EQ(eye_state(open, EyeSide::right, ear), 1);
  EXPECT_EQ(eye_state(open, EyeSide::right, std::nextafter(ear, 1.0)), 0);

  LandmarkFrame zero_width;
  EXPECT_THROW(eye_state(zero_width, EyeSide::left), InputError);
}

TEST(EyeState, MonotoneInEyelidGap) {
  for (auto side : {EyeSide::left, EyeSide::right}) {
    int prev = 0;
    for (double open = 0.0; open <= 1.0; open += 0.01) {
      const int s = eye_state(frame_from({open}), side);
      EXPECT_GE(s, prev) << open;
      prev = s;
    }
  }
  // shrinking vertical gaps of a random contour never opens a closed eye
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    LandmarkFrame f = frame_from({});
    auto v = oracle::random_vector(4, rng, 0.0, 12.0);
    f.points[37].y = face::kEyeY - v[0];
    f.points[38].y = face::kEyeY - v[1];
    f.points[40].y = face::kEyeY + v[2];
    f.points[41].y = face::kEyeY + v[3];
    const int before = eye_state(f, EyeSide::left);
    for (std::size_t i : {37u, 38u, 40u, 41u}) f.points[i].y = face::kEyeY + 0.5 * (f.points[i].y - face::kEyeY);
    EXPECT_LE(eye_state(f, EyeSide::left), before);
  }
}

TEST(MouthOpening, Examples) {
  EXPECT_NEAR(mouth_opening_degree(frame_from({1.0, 20.0})), 0.5, 1e-12);
  EXPECT_EQ(mouth_opening_degree(frame_from({1.0, 0.0})), 0.0);
  EXPECT_NEAR(mouth_opening_degree(frame_from({})), 0.05, 1e-12);
  auto f = frame_from({1.0, 13.0});
  EXPECT_NEAR(mouth_opening_degree(transformed(f, 2.0, 0, 0)), mouth_opening_degree(f), 1e-12);
  LandmarkFrame flat;
  EXPECT_THROW(mouth_opening_degree(flat), InputError);
}

TEST(MouthOpening, MatchesPairwiseOracle) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    LandmarkFrame f = frame_from({});
    auto v = oracle::random_vector(16, rng, 250.0, 350.0);
    for (std::size_t i = 0; i < 8; ++i) f.points[60 + i] = {v[2 * i], v[2 * i + 1]};
    EXPECT_NEAR(mouth_opening_degree(f), oracle::mouth_degree_bruteforce(f.points), 1e-12);
  }
}

TEST(FeatureVector, AlertYawnAndNodFrames) {
  auto alert = build_feature_vector(frame_from({}));
  EXPECT_EQ(alert.l_eye, 1.0);
  EXPECT_EQ(alert.r_eye, 1.0);
  EXPECT_NEAR(alert.mouth, 0.05, 1e-12);
  EXPECT_NEAR(alert.pitch_norm, 2.3 / 90.0, 1e-12);
  EXPECT_NEAR(alert.pitch_norm, 0.0256, 1e-4);

  auto yawn = build_feature_vector(frame_from({1.0, mouth_gap_for_degree(0.8)}));
  EXPECT_GT(yawn.mouth, 0.5);
  EXPECT_EQ(yawn.l_eye, 1.0);

  auto nod = build_feature_vector(frame_from({0.0}, -30.0));
  EXPECT_EQ(nod.l_eye, 0.0);
  EXPECT_EQ(nod.r_eye, 0.0);
  EXPECT_NEAR(nod.pitch_norm, -1.0 / 3.0, 1e-12);

  EXPECT_THROW(build_feature_vector(frame_from({}, 90.0)), InputError);
}

TEST(FeatureVector, InvariantUnderTranslationAndScale) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> open(0.0, 1.0), gap(0.0, 40.0), pitch(-80.0, 80.0);
  for (int t = 0; t < 100; ++t) {
    auto f = frame_from({open(rng), gap(rng), 1.0 + 0.2 * open(rng)}, pitch(rng));
    auto v = oracle::random_vector(3, rng, 0.1, 4.0);
    auto base = build_feature_vector(f);
    auto moved = build_feature_vector(transformed(f, v[0], 100.0 * v[1], -50.0 * v[2]));
    EXPECT_EQ(moved.l_eye, base.l_eye);
    EXPECT_EQ(moved.r_eye, base.r_eye);
    EXPECT_NEAR(moved.mouth, base.mouth, 1e-12);
    EXPECT_EQ(moved.pitch_norm, base.pitch_norm);
    EXPECT_TRUE(base.valid());
  }
}
