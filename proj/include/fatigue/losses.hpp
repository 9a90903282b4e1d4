#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fatigue/errors.hpp"

namespace fatigue {

inline constexpr std::size_t kLandmarkCount = 68;
inline constexpr std::size_t kLandmarkCoords = 2 * kLandmarkCount;  // 136
inline constexpr double kProbabilityEpsilon = 1e-12;

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Head rotation in degrees, each axis in the open interval (-90, 90).
struct PoseAngles {
  double pitch = 0.0;
  double yaw = 0.0;
  double roll = 0.0;

  std::array<double, 3> as_array() const { return {pitch, yaw, roll}; }

  void validate() const {
    for (double a : as_array()) {
      if (!(a > -90.0 && a < 90.0)) detail::reject("pose angle ", a, " outside (-90, 90)");
    }
  }
  friend bool operator==(const PoseAngles&, const PoseAngles&) = default;
};

struct LossWeights {
  double alpha = 0.5;
  double beta = 0.5;
};

// Sum of squared coordinate differences over the 136-value landmark vector.
inline double landmark_loss(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != kLandmarkCoords || truth.size() != kLandmarkCoords) {
    detail::reject("landmark loss expects ", kLandmarkCoords, " coordinates, got ", pred.size(),
                   " and ", truth.size());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    s += d * d;
  }
  return s;
}

// d/dpred
inline std::vector<double> landmark_loss_grad(std::span<const double> pred,
                                              std::span<const double> truth) {
  landmark_loss(pred, truth);
  std::vector<double> g(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = 2.0 * (pred[i] - truth[i]);
  return g;
}

inline double pose_loss(const PoseAngles& pred, const PoseAngles& truth) {
  pred.validate();
  truth.validate();
  const auto p = pred.as_array();
  const auto t = truth.as_array();
  double s = 0.0;
  for (std::size_t i = 0; i < 3; ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  return s;
}

inline std::array<double, 3> pose_loss_grad(const PoseAngles& pred, const PoseAngles& truth) {
  pred.validate();
  truth.validate();
  const auto p = pred.as_array();
  const auto t = truth.as_array();
  return {2.0 * (p[0] - t[0]), 2.0 * (p[1] - t[1]), 2.0 * (p[2] - t[2])};
}

// L = 1/2 alpha L_landmark + 1/2 beta L_pose
inline double total_loss(double landmark, double pose, const LossWeights& w = {}) {
  if (landmark < 0.0 || pose < 0.0) detail::reject("losses must be nonnegative");
  if (w.alpha < 0.0 || w.beta < 0.0) detail::reject("loss weights must be nonnegative");
  return 0.5 * w.alpha * landmark + 0.5 * w.beta * pose;
}

// Partial derivatives of total_loss w.r.t. (landmark, pose).
inline std::array<double, 2> total_loss_grad(const LossWeights& w = {}) {
  return {0.5 * w.alpha, 0.5 * w.beta};
}

inline double clamp_probability(double p) {
  return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

inline void check_label(int y) {
  if (y != 0 && y != 1) detail::reject("binary label must be 0 or 1, got ", y);
}

// -(y ln p + (1 - y) ln(1 - p)) with p clamped to [eps, 1 - eps].
inline double binary_cross_entropy(double p, int y) {
  check_label(y);
  const double q = clamp_probability(p);
  return y == 1 ? -std::log(q) : -std::log1p(-q);
}

// d/dp; zero outside the clamp interval.
inline double binary_cross_entropy_grad(double p, int y) {
  check_label(y);
  if (p < kProbabilityEpsilon || p > 1.0 - kProbabilityEpsilon) return 0.0;
  return y == 1 ? -1.0 / p : 1.0 / (1.0 - p);
}

// Outer eye corners of the 68-point scheme.
inline constexpr std::size_t kLeftEyeOuterCorner = 36;
inline constexpr std::size_t kRightEyeOuterCorner = 45;

// Per sample: mean point-to-point error over the 68 points divided by the
// ground-truth interocular distance; averaged over samples.
inline double normalized_mean_error(std::span<const std::vector<Point>> preds,
                                    std::span<const std::vector<Point>> truths,
                                    std::size_t left_corner = kLeftEyeOuterCorner,
                                    std::size_t right_corner = kRightEyeOuterCorner) {
  if (preds.empty() || preds.size() != truths.size()) {
    detail::reject("NME needs matching non-empty sample lists, got ", preds.size(), " and ",
                   truths.size());
  }
  double total = 0.0;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    const auto& p = preds[s];
    const auto& t = truths[s];
    if (p.size() != kLandmarkCount || t.size() != kLandmarkCount) {
      detail::reject("NME sample ", s, " needs ", kLandmarkCount, " points");
    }
    const double iod = distance(t[left_corner], t[right_corner]);
    if (!(iod > 0.0)) detail::reject("NME sample ", s, " has zero interocular distance");
    double err = 0.0;
    for (std::size_t i = 0; i < kLandmarkCount; ++i) err += distance(p[i], t[i]);
    total += err / static_cast<double>(kLandmarkCount) / iod;
  }
  return total / static_cast<double>(preds.size());
}

// (1/N) sum |f_i - y_i| for one angle axis.
inline double mean_absolute_error(std::span<const double> preds, std::span<const double> truths) {
  if (preds.empty()) detail::reject("MAE of an empty list");
  if (preds.size() != truths.size()) {
    detail::reject("MAE length mismatch: ", preds.size(), " vs ", truths.size());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += std::abs(preds[i] - truths[i]);
  return s / static_cast<double>(preds.size());
}

inline std::array<double, 3> mean_absolute_error(std::span<const PoseAngles> preds,
                                                 std::span<const PoseAngles> truths) {
  if (preds.size() != truths.size() || preds.empty()) {
    detail::reject("MAE needs matching non-empty pose lists");
  }
  std::array<double, 3> out{};
  for (std::size_t axis = 0; axis < 3; ++axis) {
    std::vector<double> p, t;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      p.push_back(preds[i].as_array()[axis]);
      t.push_back(truths[i].as_array()[axis]);
    }
    out[axis] = mean_absolute_error(p, t);
  }
  return out;
}

// Fraction of closed frames (state 0) among the last `window_len` states.
inline double perclos(std::span<const int> eye_states, std::size_t window_len) {
  if (window_len == 0) detail::reject("PERCLOS window must be non-empty");
  if (eye_states.size() < window_len) {
    detail::reject("PERCLOS window of ", window_len, " frames over ", eye_states.size(), " states");
  }
  std::size_t closed = 0;
  for (int s : eye_states.last(window_len)) {
    if (s != 0 && s != 1) detail::reject("eye state must be 0 or 1, got ", s);
    closed += s == 0 ? 1 : 0;
  }
  return static_cast<double>(closed) / static_cast<double>(window_len);
}

}  // namespace fatigue
