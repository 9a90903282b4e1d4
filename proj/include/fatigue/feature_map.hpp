#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fatigue/errors.hpp"

namespace fatigue {

struct Shape3 {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Shape3& s) {
  return os << s.height << "x" << s.width << "x" << s.channels;
}

// Dense H x W x C activation grid stored row-major with channels innermost:
// element (y, x, c) lives at (y * W + x) * C + c.
template <typename T = double>
class FeatureMap {
 public:
  using value_type = T;

  FeatureMap() = default;

  FeatureMap(Shape3 shape, T fill = T{}) : shape_(shape), data_(shape.size(), fill) {
    check_shape();
  }

  FeatureMap(std::size_t h, std::size_t w, std::size_t c, T fill = T{})
      : FeatureMap(Shape3{h, w, c}, fill) {}

  FeatureMap(Shape3 shape, std::vector<T> data) : shape_(shape), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_.size()) {
      detail::reject("feature map ", shape_, " needs ", shape_.size(),
                     " values, got ", data_.size());
    }
  }

  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t size() const { return data_.size(); }
  const Shape3& shape() const { return shape_; }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t y, std::size_t x, std::size_t c) {
    return data_[(y * shape_.width + x) * shape_.channels + c];
  }
  const T& operator()(std::size_t y, std::size_t x, std::size_t c) const {
    return data_[(y * shape_.width + x) * shape_.channels + c];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  void check_shape() const {
    if (shape_.height == 0 || shape_.width == 0 || shape_.channels == 0) {
      detail::reject("feature map dimensions must be positive, got ", shape_);
    }
  }

  Shape3 shape_{};
  std::vector<T> data_;
};

}  // namespace fatigue
