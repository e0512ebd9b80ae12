#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sarpn {

/// Dense (channel, row, col) array of doubles. Depth maps are single-channel
/// feature maps; see `DepthMap`.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int channels, int height, int width, double fill = 0.0);

  int channels() const noexcept { return channels_; }
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t plane_size() const noexcept {
    return static_cast<std::size_t>(height_) * width_;
  }
  bool empty() const noexcept { return values_.empty(); }

  double& operator()(int c, int y, int x) noexcept {
    return values_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  double operator()(int c, int y, int x) const noexcept {
    return values_[(static_cast<std::size_t>(c) * height_ + y) * width_ + x];
  }
  // Single-channel convenience accessors.
  double& at(int y, int x) noexcept { return (*this)(0, y, x); }
  double at(int y, int x) const noexcept { return (*this)(0, y, x); }

  std::span<double> data() noexcept { return values_; }
  std::span<const double> data() const noexcept { return values_; }
  std::span<double> channel(int c) noexcept {
    return std::span<double>(values_).subspan(c * plane_size(), plane_size());
  }
  std::span<const double> channel(int c) const noexcept {
    return std::span<const double>(values_).subspan(c * plane_size(),
                                                    plane_size());
  }

  bool same_shape(const FeatureMap& other) const noexcept {
    return channels_ == other.channels_ && height_ == other.height_ &&
           width_ == other.width_;
  }
  bool same_spatial(const FeatureMap& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }
  std::string shape_string() const;

  void fill(double v);
  FeatureMap& operator+=(const FeatureMap& other);
  FeatureMap& operator*=(double s);

  bool operator==(const FeatureMap& other) const = default;

 private:
  int channels_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<double> values_;
};

/// Single-channel map of depth in meters. Zero marks an invalid (hole) pixel
/// in ground truth.
using DepthMap = FeatureMap;

inline DepthMap make_depth(int height, int width, double fill = 0.0) {
  return DepthMap(1, height, width, fill);
}

/// Spatial size of pyramid level `level` (1-based) for an input of (height, width).
struct LevelSize {
  int height;
  int width;
  bool operator==(const LevelSize&) const = default;
};
LevelSize level_size(int height, int width, int level);

}  // namespace sarpn
