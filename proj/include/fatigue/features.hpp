#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>

#include "fatigue/errors.hpp"
#include "fatigue/losses.hpp"

namespace fatigue {

// Index ranges of the standard 68-point annotation.
namespace landmark_index {
inline constexpr std::size_t kLeftEyeBegin = 36;   // 36..41
inline constexpr std::size_t kRightEyeBegin = 42;  // 42..47
inline constexpr std::size_t kInnerMouthBegin = 60;  // 60..67
}  // namespace landmark_index

enum class EyeSide { left, right };

struct LandmarkFrame {
  double timestamp = 0.0;  // seconds
  std::array<Point, kLandmarkCount> points{};
  PoseAngles pose{};
  std::optional<int> label;  // 1 fatigue, 0 normal
};

inline constexpr double kDefaultEyeExpansion = 0.25;
inline constexpr double kDefaultEarThreshold = 0.2;

struct FeatureConfig {
  double ear_threshold = kDefaultEarThreshold;
};

// Per-frame vector (left eye, right eye, mouth opening, pitch / 90).
struct FatigueFeatureVector {
  double l_eye = 1.0;
  double r_eye = 1.0;
  double mouth = 0.0;
  double pitch_norm = 0.0;

  static constexpr std::size_t kSize = 4;

  std::array<double, kSize> as_array() const { return {l_eye, r_eye, mouth, pitch_norm}; }
  static FatigueFeatureVector from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3]};
  }

  bool valid() const {
    auto binary = [](double v) { return v == 0.0 || v == 1.0; };
    return binary(l_eye) && binary(r_eye) && mouth >= 0.0 && std::isfinite(mouth) &&
           pitch_norm > -1.0 && pitch_norm < 1.0;
  }
  friend bool operator==(const FatigueFeatureVector&, const FatigueFeatureVector&) = default;
};

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  bool contains(const Point& p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  friend bool operator==(const Box&, const Box&) = default;
};

inline std::array<Point, 6> eye_contour(const LandmarkFrame& frame, EyeSide side) {
  const std::size_t begin =
      side == EyeSide::left ? landmark_index::kLeftEyeBegin : landmark_index::kRightEyeBegin;
  std::array<Point, 6> c;
  std::copy_n(frame.points.begin() + static_cast<std::ptrdiff_t>(begin), 6, c.begin());
  return c;
}

// Bounding box of the six eye-contour points, grown by `expansion` times the
// side length on each side and clipped at the image origin.
inline Box eye_region(const LandmarkFrame& frame, EyeSide side,
                      double expansion = kDefaultEyeExpansion) {
  if (expansion < 0.0) detail::reject("eye region expansion must be >= 0, got ", expansion);
  const auto c = eye_contour(frame, side);
  Box b{c[0].x, c[0].y, c[0].x, c[0].y};
  for (const auto& p : c) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  if (b.x0 == b.x1 && b.y0 == b.y1) detail::reject("degenerate eye contour: all points coincide");
  const double dx = expansion * (b.x1 - b.x0);
  const double dy = expansion * (b.y1 - b.y0);
  return {std::max(0.0, b.x0 - dx), std::max(0.0, b.y0 - dy), b.x1 + dx, b.y1 + dy};
}

// Eye aspect ratio over contour points p1..p6:
//   (|p2 - p6| + |p3 - p5|) / (2 |p1 - p4|)
inline double eye_aspect_ratio(const LandmarkFrame& frame, EyeSide side) {
  const auto p = eye_contour(frame, side);
  const double width = distance(p[0], p[3]);
  if (!(width > 0.0)) detail::reject("eye contour has zero horizontal width");
  return (distance(p[1], p[5]) + distance(p[2], p[4])) / (2.0 * width);
}

// 1 = open, 0 = closed. Open iff EAR >= threshold.
inline int eye_state(const LandmarkFrame& frame, EyeSide side,
                     double threshold = kDefaultEarThreshold) {
  return eye_aspect_ratio(frame, side) >= threshold ? 1 : 0;
}

// Max inner-lip gap over the vertical pairs (61,67), (62,66), (63,65) divided
// by the inner-lip width |p60 - p64|.
inline double mouth_opening_degree(const LandmarkFrame& frame) {
  const auto& p = frame.points;
  const std::size_t b = landmark_index::kInnerMouthBegin;
  const double width = distance(p[b + 0], p[b + 4]);
  if (!(width > 0.0)) detail::reject("inner mouth contour has zero width");
  const double height = std::max({distance(p[b + 1], p[b + 7]), distance(p[b + 2], p[b + 6]),
                                  distance(p[b + 3], p[b + 5])});
  return height / width;
}

inline double normalize_pitch(double pitch_deg) {
  if (!(pitch_deg > -90.0 && pitch_deg < 90.0)) {
    detail::reject("pitch ", pitch_deg, " outside (-90, 90)");
  }
  return pitch_deg / 90.0;
}

inline FatigueFeatureVector build_feature_vector(const LandmarkFrame& frame,
                                                 const FeatureConfig& cfg = {}) {
  return {static_cast<double>(eye_state(frame, EyeSide::left, cfg.ear_threshold)),
          static_cast<double>(eye_state(frame, EyeSide::right, cfg.ear_threshold)),
          mouth_opening_degree(frame), normalize_pitch(frame.pose.pitch)};
}

}  // namespace fatigue
