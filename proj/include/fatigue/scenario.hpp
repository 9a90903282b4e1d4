#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "fatigue/errors.hpp"
#include "fatigue/features.hpp"
#include "fatigue/sequence.hpp"

namespace fatigue {

// ---------------------------------------------------------------------------
// Canonical face template
// ---------------------------------------------------------------------------

struct FaceShape {
  double eye_open = 1.0;     // 1 fully open, 0 shut
  double mouth_gap = 2.0;    // inner-lip vertical gap in px
  double mouth_widen = 1.0;  // horizontal mouth scale (smile > 1)
};

namespace face {
inline constexpr double kCenterX = 320.0;
inline constexpr double kEyeY = 210.0;
inline constexpr double kMouthY = 300.0;
inline constexpr double kEyeHalfHeight = 4.5;  // eye width 30 px -> EAR 0.3 when open
inline constexpr double kInnerMouthWidth = 40.0;
inline constexpr double kInterocular = 100.0;  // |p36 - p45|
inline constexpr double kOpenEar = 2.0 * 2.0 * kEyeHalfHeight / (2.0 * 30.0);
}  // namespace face

// Neutral frontal 68-point face (interocular distance 100 px) deformed by
// `shape`. Eye opening scales the eyelid offsets, mouth_gap separates the
// inner lips symmetrically about the mouth line.
inline std::array<Point, kLandmarkCount> face_template(const FaceShape& shape = {}) {
  using namespace face;
  std::array<Point, kLandmarkCount> p{};
  for (std::size_t j = 0; j <= 16; ++j) {
    const double a = std::numbers::pi * static_cast<double>(j) / 16.0;
    p[j] = {kCenterX - 90.0 * std::cos(a), 220.0 + 110.0 * std::sin(a)};
  }
  const std::array<double, 5> brow_dy = {4.0, 0.0, -2.0, 0.0, 4.0};
  for (std::size_t j = 0; j < 5; ++j) {
    p[17 + j] = {255.0 + 11.0 * static_cast<double>(j), 185.0 + brow_dy[j]};
    p[22 + j] = {341.0 + 11.0 * static_cast<double>(j), 185.0 + brow_dy[4 - j]};
  }
  for (std::size_t j = 0; j < 4; ++j) p[27 + j] = {kCenterX, 205.0 + 15.0 * static_cast<double>(j)};
  for (std::size_t j = 0; j < 5; ++j) {
    p[31 + j] = {300.0 + 10.0 * static_cast<double>(j), 265.0 + (j == 2 ? 3.0 : 0.0)};
  }
  const double h = kEyeHalfHeight * std::clamp(shape.eye_open, 0.0, 1.0);
  // contour order: corner, upper, upper, corner, lower, lower
  auto eye = [&](std::size_t base, double a) {
    p[base + 0] = {a, kEyeY};
    p[base + 1] = {a + 10.0, kEyeY - h};
    p[base + 2] = {a + 20.0, kEyeY - h};
    p[base + 3] = {a + 30.0, kEyeY};
    p[base + 4] = {a + 20.0, kEyeY + h};
    p[base + 5] = {a + 10.0, kEyeY + h};
  };
  eye(36, 270.0);
  eye(42, 340.0);

  const double half_gap = 0.5 * std::max(0.0, shape.mouth_gap);
  const double widen = shape.mouth_widen;
  auto mx = [&](double x) { return kCenterX + (x - kCenterX) * widen; };
  const double corner_lift = 6.0 * (widen - 1.0);
  p[48] = {mx(290.0), kMouthY - corner_lift};
  const std::array<double, 5> upper = {292.0, 289.0, 290.0, 289.0, 292.0};
  for (std::size_t j = 0; j < 5; ++j) {
    p[49 + j] = {mx(300.0 + 10.0 * static_cast<double>(j)), upper[j] - half_gap};
  }
  p[54] = {mx(350.0), kMouthY - corner_lift};
  const std::array<double, 5> lower = {310.0, 314.0, 315.0, 314.0, 310.0};
  for (std::size_t j = 0; j < 5; ++j) {
    p[55 + j] = {mx(340.0 - 10.0 * static_cast<double>(j)), lower[j] + half_gap};
  }
  const double w = kInnerMouthWidth / 2.0;
  p[60] = {mx(kCenterX - w), kMouthY};
  p[61] = {mx(kCenterX - 10.0), kMouthY - half_gap};
  p[62] = {mx(kCenterX), kMouthY - half_gap};
  p[63] = {mx(kCenterX + 10.0), kMouthY - half_gap};
  p[64] = {mx(kCenterX + w), kMouthY};
  p[65] = {mx(kCenterX + 10.0), kMouthY + half_gap};
  p[66] = {mx(kCenterX), kMouthY + half_gap};
  p[67] = {mx(kCenterX - 10.0), kMouthY + half_gap};
  return p;
}

// Inner-lip gap that yields a given opening degree on the unwidened mouth.
inline double mouth_gap_for_degree(double degree) { return degree * face::kInnerMouthWidth; }

// ---------------------------------------------------------------------------
// Timeline
// ---------------------------------------------------------------------------

enum class EventKind { blink, long_closure, yawn, nod, talk, smile };

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::blink: return "blink";
    case EventKind::long_closure: return "long_closure";
    case EventKind::yawn: return "yawn";
    case EventKind::nod: return "nod";
    case EventKind::talk: return "talk";
    case EventKind::smile: return "smile";
  }
  return "?";
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

struct ScenarioConfig {
  double duration = 600.0;  // seconds
  double fps = 30.0;
  // Fraction of stream time covered by fatigue episodes.
  double fatigue_prior = 0.35;
  std::uint64_t seed = 1;

  Range episode_events{1, 3};        // back-to-back fatigue events per episode
  Range min_gap{4.0, 4.0};           // shortest normal stretch between episodes (s)

  double blink_rate = 15.0;          // per minute, alert
  Range blink_duration{0.10, 0.25};
  Range closure_duration{3.0, 5.0};
  Range yawn_duration{3.0, 5.0};
  Range yawn_peak{0.65, 0.95};       // opening degree at the top of a yawn
  std::size_t nod_burst_count = 3;   // oscillations per fatigue nod burst
  Range nod_period{1.0, 1.6};
  Range nod_amplitude{22.0, 28.0};   // degrees
  double dip_rate = 0.5;             // isolated single head dips per minute
  Range dip_duration{1.5, 2.5};
  Range dip_amplitude{8.0, 14.0};
  double talk_rate = 1.0;            // per minute
  Range talk_duration{2.0, 6.0};
  double talk_peak = 0.2;
  double talk_frequency = 4.0;       // Hz
  double smile_rate = 0.5;
  Range smile_duration{1.0, 3.0};

  double jitter_px = 0.5;
  double base_pitch = 2.3;           // degrees
  double pose_wander = 1.5;          // degrees
  // Per-frame head-pose estimation noise (Gaussian sigma, degrees). The
  // defaults correspond to mean absolute errors of about 3.8 / 2.4 / 1.4
  // degrees on pitch / yaw / roll (sigma = MAE * sqrt(pi / 2)).
  PoseAngles pose_noise{4.78, 2.98, 1.73};

  std::size_t frame_count() const {
    return static_cast<std::size_t>(std::llround(duration * fps));
  }

  void validate() const {
    if (!(fps >= 1.0)) detail::reject("fps must be >= 1, got ", fps);
    if (!(duration > 0.0)) detail::reject("duration must be positive");
    if (!(fatigue_prior >= 0.0 && fatigue_prior < 1.0)) {
      detail::reject("fatigue prior must lie in [0,1), got ", fatigue_prior);
    }
    for (const Range* r : {&episode_events, &blink_duration, &closure_duration, &yawn_duration,
                           &yawn_peak, &nod_period, &nod_amplitude, &dip_duration, &dip_amplitude,
                           &talk_duration, &smile_duration, &min_gap}) {
      if (r->lo > r->hi || r->lo < 0.0) detail::reject("invalid scenario range [", r->lo, ",", r->hi, "]");
    }
    if (episode_events.lo < 1.0) detail::reject("episodes need at least one event");
    if (nod_burst_count < 1) detail::reject("nod burst count must be >= 1");
  }
};

struct Event {
  EventKind kind = EventKind::blink;
  double start = 0.0;
  double duration = 0.0;
  double amplitude = 0.0;   // yawn peak degree, nod/dip depth in degrees
  double period = 0.0;      // nod oscillation period
  std::size_t count = 0;    // nod oscillations

  double end() const { return start + duration; }
  bool active(double t) const { return t >= start && t < end(); }
  // Frequent nodding counts as fatigue; a single dip does not.
  bool fatigue(std::size_t burst_count) const {
    return kind == EventKind::long_closure || kind == EventKind::yawn ||
           (kind == EventKind::nod && count >= burst_count);
  }
};

struct EventTimeline {
  double fps = 30.0;
  double duration = 0.0;
  std::size_t nod_burst_count = 3;
  std::vector<Event> events;  // sorted by start
  std::vector<int> labels;    // one per frame

  double frame_time(std::size_t i) const { return static_cast<double>(i) / fps; }

  std::vector<const Event*> active(double t) const {
    std::vector<const Event*> out;
    for (const auto& e : events) {
      if (e.start > t) break;
      if (e.active(t)) out.push_back(&e);
    }
    return out;
  }
};

namespace detail {

inline double uniform(std::mt19937_64& rng, const Range& r) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

// Poisson arrivals of non-overlapping events of one kind in [a, b).
template <typename Make>
void place_poisson(std::mt19937_64& rng, double rate_per_min, double a, double b, Make&& make,
                   std::vector<Event>& out, double min_spacing = 0.0) {
  if (rate_per_min <= 0.0) return;
  std::exponential_distribution<double> wait(rate_per_min / 60.0);
  double t = a + wait(rng);
  while (t < b) {
    Event e = make(t);
    if (e.end() > b) break;
    out.push_back(e);
    t = e.end() + min_spacing + wait(rng);
  }
}

}  // namespace detail

// Alternates normal stretches (blinks, talking, smiling, isolated head dips)
// with fatigue episodes made of back-to-back long closures, yawns and nod
// bursts. Frames inside fatigue events are labeled 1.
inline EventTimeline generate_timeline(const ScenarioConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  EventTimeline tl;
  tl.fps = cfg.fps;
  tl.duration = cfg.duration;
  tl.nod_burst_count = cfg.nod_burst_count;

  const double mean_events = 0.5 * (cfg.episode_events.lo + cfg.episode_events.hi);
  const double mean_nod = static_cast<double>(cfg.nod_burst_count) * 0.5 * (cfg.nod_period.lo + cfg.nod_period.hi);
  const double mean_event = (0.5 * (cfg.closure_duration.lo + cfg.closure_duration.hi) +
                             0.5 * (cfg.yawn_duration.lo + cfg.yawn_duration.hi) + mean_nod) / 3.0;
  const double mean_episode = mean_events * mean_event;
  const double min_gap = detail::uniform(rng, cfg.min_gap);
  const bool fatigue = cfg.fatigue_prior > 0.0;
  // Mean normal stretch so that episodes cover `fatigue_prior` of the time.
  const double mean_gap = fatigue ? mean_episode * (1.0 - cfg.fatigue_prior) / cfg.fatigue_prior : 0.0;
  const double extra_gap = std::max(0.0, mean_gap - min_gap);

  auto fatigue_event = [&](EventKind kind, double start) {
    Event e;
    e.kind = kind;
    e.start = start;
    switch (kind) {
      case EventKind::long_closure: e.duration = detail::uniform(rng, cfg.closure_duration); break;
      case EventKind::yawn:
        e.duration = detail::uniform(rng, cfg.yawn_duration);
        e.amplitude = detail::uniform(rng, cfg.yawn_peak);
        break;
      default:
        e.kind = EventKind::nod;
        e.count = cfg.nod_burst_count;
        e.period = detail::uniform(rng, cfg.nod_period);
        e.amplitude = detail::uniform(rng, cfg.nod_amplitude);
        e.duration = e.period * static_cast<double>(e.count);
        break;
    }
    return e;
  };

  std::vector<Event> events;
  auto fill_normal = [&](double a, double b) {
    detail::place_poisson(rng, cfg.blink_rate, a, b, [&](double t) {
      return Event{EventKind::blink, t, detail::uniform(rng, cfg.blink_duration)};
    }, events, 0.3);
    // Talking and smiling share the mouth and never overlap.
    std::vector<Event> mouth;
    detail::place_poisson(rng, cfg.talk_rate + cfg.smile_rate, a, b, [&](double t) {
      const bool talk = std::uniform_real_distribution<double>(0.0, cfg.talk_rate + cfg.smile_rate)(rng) < cfg.talk_rate;
      return talk ? Event{EventKind::talk, t, detail::uniform(rng, cfg.talk_duration)}
                  : Event{EventKind::smile, t, detail::uniform(rng, cfg.smile_duration)};
    }, mouth, 0.5);
    events.insert(events.end(), mouth.begin(), mouth.end());
    detail::place_poisson(rng, cfg.dip_rate, a, b, [&](double t) {
      Event e{EventKind::nod, t, detail::uniform(rng, cfg.dip_duration)};
      e.amplitude = detail::uniform(rng, cfg.dip_amplitude);
      e.period = e.duration;
      e.count = 1;
      return e;
    }, events, 1.0);
  };

  std::exponential_distribution<double> gap_tail(extra_gap > 0.0 ? 1.0 / extra_gap : 1.0);
  double t = 0.0;
  while (t < cfg.duration) {
    double gap = fatigue ? min_gap + gap_tail(rng) : cfg.duration;
    const double normal_end = std::min(cfg.duration, t + gap);
    fill_normal(t, normal_end);
    t = normal_end;
    if (!fatigue || t >= cfg.duration) break;

    const auto n_events = static_cast<std::size_t>(std::uniform_int_distribution<int>(
        static_cast<int>(cfg.episode_events.lo), static_cast<int>(cfg.episode_events.hi))(rng));
    int prev = -1;
    for (std::size_t i = 0; i < n_events; ++i) {
      int kind = std::uniform_int_distribution<int>(0, 2)(rng);
      if (kind == prev) kind = (kind + 1 + std::uniform_int_distribution<int>(0, 1)(rng)) % 3;
      prev = kind;
      const EventKind k = kind == 0 ? EventKind::long_closure : kind == 1 ? EventKind::yawn : EventKind::nod;
      Event e = fatigue_event(k, t);
      if (e.end() > cfg.duration) {
        t = cfg.duration;
        break;
      }
      events.push_back(e);
      t = e.end();
    }
  }

  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.start < b.start; });
  tl.events = std::move(events);
  tl.labels.assign(cfg.frame_count(), 0);
  for (const auto& e : tl.events) {
    if (!e.fatigue(cfg.nod_burst_count)) continue;
    const auto lo = static_cast<std::size_t>(std::ceil(e.start * cfg.fps - 1e-9));
    for (std::size_t i = lo; i < tl.labels.size() && tl.frame_time(i) < e.end(); ++i) {
      if (e.active(tl.frame_time(i))) tl.labels[i] = 1;
    }
  }
  return tl;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

struct FrameState {
  FaceShape shape;
  PoseAngles pose;
};

namespace detail {

// 0 -> 1 -> 0 with linear ramps of `ramp` seconds at each end.
inline double trapezoid(double u_time, double duration, double ramp) {
  const double r = std::min(ramp, 0.5 * duration);
  if (u_time < r) return u_time / r;
  if (u_time > duration - r) return std::max(0.0, (duration - u_time) / r);
  return 1.0;
}

}  // namespace detail

// Deterministic face state (no jitter) at time t under the timeline.
inline FrameState frame_state(const EventTimeline& tl, const ScenarioConfig& cfg, double t,
                              const std::array<double, 6>& wander_phase = {}) {
  using std::numbers::pi;
  FrameState s;
  const double alert_gap = mouth_gap_for_degree(0.05);
  s.shape.mouth_gap = alert_gap;
  double pitch = cfg.base_pitch + cfg.pose_wander * (0.6 * std::sin(2 * pi * 0.05 * t + wander_phase[0]) +
                                                     0.4 * std::sin(2 * pi * 0.13 * t + wander_phase[1]));
  double yaw = 2.0 * cfg.pose_wander * std::sin(2 * pi * 0.03 * t + wander_phase[2]);
  double roll = cfg.pose_wander * std::sin(2 * pi * 0.07 * t + wander_phase[3]);
  for (const Event* e : tl.active(t)) {
    const double u = t - e->start;
    switch (e->kind) {
      case EventKind::blink:
        s.shape.eye_open = std::min(s.shape.eye_open, std::abs(2.0 * u / e->duration - 1.0));
        break;
      case EventKind::long_closure:
        s.shape.eye_open = std::min(s.shape.eye_open, 1.0 - detail::trapezoid(u, e->duration, 0.15));
        break;
      case EventKind::yawn: {
        // Raised-cosine opening over the first and last quarter, held between.
        const double q = e->duration / 4.0;
        double level = 1.0;
        if (u < q) level = 0.5 - 0.5 * std::cos(pi * u / q);
        else if (u > e->duration - q) level = 0.5 - 0.5 * std::cos(pi * (e->duration - u) / q);
        s.shape.mouth_gap = std::max(s.shape.mouth_gap, alert_gap + level * (mouth_gap_for_degree(e->amplitude) - alert_gap));
        break;
      }
      case EventKind::nod:
        if (e->count <= 1) {
          pitch -= e->amplitude * std::sin(pi * u / e->duration);
        } else {
          pitch -= e->amplitude * 0.5 * (1.0 - std::cos(2 * pi * u / e->period));
        }
        break;
      case EventKind::talk: {
        const double level = std::abs(std::sin(2 * pi * cfg.talk_frequency * u));
        s.shape.mouth_gap = std::max(s.shape.mouth_gap, alert_gap + level * (mouth_gap_for_degree(cfg.talk_peak) - alert_gap));
        break;
      }
      case EventKind::smile:
        s.shape.mouth_widen = 1.0 + 0.2 * detail::trapezoid(u, e->duration, 0.3);
        s.shape.mouth_gap = std::min(s.shape.mouth_gap, mouth_gap_for_degree(0.03));
        break;
    }
  }
  s.pose = {std::clamp(pitch, -89.0, 89.0), yaw, roll};
  return s;
}

// Renders every frame: deformed template, per-scenario scale and slow head
// drift in image space, plus Gaussian landmark jitter.
inline std::vector<LandmarkFrame> render_frames(const EventTimeline& tl, const ScenarioConfig& cfg) {
  using std::numbers::pi;
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> phase(0.0, 2 * pi);
  std::array<double, 6> wander{};
  for (auto& w : wander) w = phase(rng);
  const double scale = std::uniform_real_distribution<double>(0.9, 1.1)(rng);
  std::normal_distribution<double> jitter(0.0, cfg.jitter_px);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<LandmarkFrame> frames(tl.labels.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const double t = tl.frame_time(i);
    const FrameState st = frame_state(tl, cfg, t, wander);
    const auto pts = face_template(st.shape);
    const double dx = 8.0 * std::sin(2 * pi * 0.02 * t + wander[4]);
    const double dy = 5.0 * std::sin(2 * pi * 0.025 * t + wander[5]);
    LandmarkFrame& f = frames[i];
    f.timestamp = t;
    f.pose = st.pose;
    if (cfg.pose_noise.pitch > 0.0) f.pose.pitch += cfg.pose_noise.pitch * unit(rng);
    if (cfg.pose_noise.yaw > 0.0) f.pose.yaw += cfg.pose_noise.yaw * unit(rng);
    if (cfg.pose_noise.roll > 0.0) f.pose.roll += cfg.pose_noise.roll * unit(rng);
    f.pose.pitch = std::clamp(f.pose.pitch, -89.0, 89.0);
    f.label = tl.labels[i];
    for (std::size_t k = 0; k < kLandmarkCount; ++k) {
      const double x = face::kCenterX + (pts[k].x - face::kCenterX) * scale + dx;
      const double y = 240.0 + (pts[k].y - 240.0) * scale + dy;
      f.points[k] = {x + (cfg.jitter_px > 0.0 ? jitter(rng) : 0.0),
                     y + (cfg.jitter_px > 0.0 ? jitter(rng) : 0.0)};
    }
  }
  return frames;
}

struct ScenarioData {
  EventTimeline timeline;
  std::vector<LandmarkFrame> frames;
  std::vector<FatigueFeatureVector> features;
  std::vector<int> labels;
};

inline ScenarioData generate_scenario(const ScenarioConfig& cfg, const FeatureConfig& fcfg = {}) {
  ScenarioData d;
  d.timeline = generate_timeline(cfg);
  d.frames = render_frames(d.timeline, cfg);
  d.features.reserve(d.frames.size());
  for (const auto& f : d.frames) d.features.push_back(build_feature_vector(f, fcfg));
  d.labels = d.timeline.labels;
  return d;
}

struct GeneratedDataset {
  ScenarioData scenario;
  SlideResult slide;
  std::size_t fatigue_samples = 0;
  std::size_t normal_samples = 0;

  // fatigue : normal expressed as normal per fatigue sample (3.0 means 1:3)
  double normal_per_fatigue() const {
    return fatigue_samples ? static_cast<double>(normal_samples) / static_cast<double>(fatigue_samples) : 0.0;
  }
};

inline GeneratedDataset generate_dataset(const ScenarioConfig& cfg, const SlideConfig& slide,
                                         const FeatureConfig& fcfg = {}) {
  if (cfg.frame_count() < slide.window_len) {
    detail::reject("scenario has ", cfg.frame_count(), " frames, fewer than window ", slide.window_len);
  }
  GeneratedDataset g;
  g.scenario = generate_scenario(cfg, fcfg);
  g.slide = slide_dataset(g.scenario.features, g.scenario.labels, slide);
  for (const auto& s : g.slide.samples) (s.label ? g.fatigue_samples : g.normal_samples)++;
  return g;
}

}  // namespace fatigue
