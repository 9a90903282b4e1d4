#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "fatigue/errors.hpp"
#include "fatigue/features.hpp"

namespace fatigue {

inline constexpr double kDefaultLabelThreshold = 0.8;
inline constexpr std::size_t kDefaultStride = 30;

// Frames kept from an N-frame window when k frames are skipped between
// retained ones: indices 0, k+1, 2(k+1), ... < N.
constexpr std::size_t retained_length(std::size_t window_len, std::size_t skip) {
  return (window_len + skip) / (skip + 1);
}

template <typename T>
std::vector<T> skip_sample(std::span<const T> frames, std::size_t skip) {
  std::vector<T> out;
  out.reserve(retained_length(frames.size(), skip));
  for (std::size_t i = 0; i < frames.size(); i += skip + 1) out.push_back(frames[i]);
  return out;
}

// Fixed-capacity FIFO of per-frame feature vectors. Once full, each push
// drops the oldest entry and appends the new one, so the length stays N.
class FeatureWindow {
 public:
  explicit FeatureWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) detail::reject("feature window capacity must be positive");
  }

  // Returns true when an entry was evicted.
  bool push(const FatigueFeatureVector& v) {
    bool evicted = false;
    if (entries_.size() == capacity_) {
      entries_.pop_front();
      evicted = true;
    }
    entries_.push_back(v);
    ++pushed_;
    return evicted;
  }

  void clear() {
    entries_.clear();
    pushed_ = 0;
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool full() const { return entries_.size() == capacity_; }
  std::size_t total_pushed() const { return pushed_; }
  const std::deque<FatigueFeatureVector>& entries() const { return entries_; }
  const FatigueFeatureVector& front() const { return entries_.front(); }
  const FatigueFeatureVector& back() const { return entries_.back(); }

 private:
  std::size_t capacity_;
  std::size_t pushed_ = 0;
  std::deque<FatigueFeatureVector> entries_;
};

// 4 x L matrix, row-major; row r is feature r (l_eye, r_eye, mouth,
// pitch_norm), column j is the j-th retained frame in temporal order.
struct SequenceSample {
  static constexpr std::size_t kRows = FatigueFeatureVector::kSize;

  std::size_t cols = 0;
  std::vector<double> matrix;
  int label = 0;
  std::size_t window_len = 0;
  std::size_t skip = 0;
  std::size_t start = 0;  // first frame index of the window in its stream

  double at(std::size_t row, std::size_t col) const { return matrix[row * cols + col]; }
  FatigueFeatureVector column(std::size_t col) const {
    return {at(0, col), at(1, col), at(2, col), at(3, col)};
  }
};

inline std::vector<double> frames_to_matrix(std::span<const FatigueFeatureVector> frames) {
  const std::size_t cols = frames.size();
  std::vector<double> m(SequenceSample::kRows * cols);
  for (std::size_t j = 0; j < cols; ++j) {
    const auto a = frames[j].as_array();
    for (std::size_t r = 0; r < SequenceSample::kRows; ++r) m[r * cols + j] = a[r];
  }
  return m;
}

inline SequenceSample as_matrix(const FeatureWindow& window, std::size_t skip) {
  if (!window.full()) {
    throw StateError(detail::concat("window holds ", window.size(), " of ", window.capacity(),
                                    " frames; matrix view needs a full window"));
  }
  std::vector<FatigueFeatureVector> snapshot(window.entries().begin(), window.entries().end());
  auto kept = skip_sample<FatigueFeatureVector>(snapshot, skip);
  SequenceSample s;
  s.cols = kept.size();
  s.matrix = frames_to_matrix(kept);
  s.window_len = window.capacity();
  s.skip = skip;
  s.start = window.total_pushed() - window.capacity();
  return s;
}

// 1 (fatigue) iff the fatigue share is strictly greater than `threshold`.
inline int label_window(std::span<const int> frame_labels,
                        double threshold = kDefaultLabelThreshold) {
  if (frame_labels.empty()) detail::reject("cannot label an empty window");
  std::size_t fatigue = 0;
  for (int l : frame_labels) {
    check_label(l);
    fatigue += static_cast<std::size_t>(l);
  }
  return static_cast<double>(fatigue) / static_cast<double>(frame_labels.size()) > threshold ? 1 : 0;
}

struct SlideConfig {
  std::size_t window_len = 150;
  std::size_t skip = 0;
  std::size_t stride = kDefaultStride;
  double label_threshold = kDefaultLabelThreshold;
};

struct SlideResult {
  std::vector<SequenceSample> samples;
  std::string warning;  // non-empty when the stream was too short
};

constexpr std::size_t window_count(std::size_t stream_len, std::size_t window_len,
                                   std::size_t stride) {
  return stream_len < window_len ? 0 : (stream_len - window_len) / stride + 1;
}

// One sample per window start 0, stride, 2*stride, ...; each skip-sampled and
// labeled with label_window over all N frame labels.
inline SlideResult slide_dataset(std::span<const FatigueFeatureVector> features,
                                 std::span<const int> labels, const SlideConfig& cfg) {
  if (cfg.window_len == 0 || cfg.stride == 0) detail::reject("window length and stride must be >= 1");
  if (features.size() != labels.size()) {
    detail::reject("stream has ", features.size(), " feature vectors but ", labels.size(), " labels");
  }
  SlideResult r;
  if (features.size() < cfg.window_len) {
    r.warning = detail::concat("stream of ", features.size(), " frames is shorter than window ",
                               cfg.window_len, "; no samples produced");
    return r;
  }
  const std::size_t n = window_count(features.size(), cfg.window_len, cfg.stride);
  r.samples.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    const std::size_t start = w * cfg.stride;
    auto kept = skip_sample(features.subspan(start, cfg.window_len), cfg.skip);
    SequenceSample s;
    s.cols = kept.size();
    s.matrix = frames_to_matrix(kept);
    s.label = label_window(labels.subspan(start, cfg.window_len), cfg.label_threshold);
    s.window_len = cfg.window_len;
    s.skip = cfg.skip;
    s.start = start;
    r.samples.push_back(std::move(s));
  }
  return r;
}

}  // namespace fatigue
