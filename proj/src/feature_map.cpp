#include "sarpn/feature_map.hpp"

#include <algorithm>
#include <cmath>

#include "sarpn/errors.hpp"

namespace sarpn {

FeatureMap::FeatureMap(int channels, int height, int width, double fill)
    : channels_(channels), height_(height), width_(width) {
  if (channels < 1 || height < 1 || width < 1) {
    throw ConfigError("feature map dimensions must be positive, got " +
                      std::to_string(channels) + "x" + std::to_string(height) +
                      "x" + std::to_string(width));
  }
  values_.assign(static_cast<std::size_t>(channels) * height * width, fill);
}

std::string FeatureMap::shape_string() const {
  return std::to_string(channels_) + "x" + std::to_string(height_) + "x" +
         std::to_string(width_);
}

void FeatureMap::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

FeatureMap& FeatureMap::operator+=(const FeatureMap& other) {
  if (!same_shape(other)) {
    throw ConfigError("shape mismatch in +=: " + shape_string() + " vs " +
                      other.shape_string());
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

FeatureMap& FeatureMap::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

LevelSize level_size(int height, int width, int level) {
  if (level < 0) throw ConfigError("negative pyramid level");
  const int scale = 1 << level;
  if (height % scale != 0 || width % scale != 0) {
    throw ConfigError("input size " + std::to_string(height) + "x" +
                      std::to_string(width) + " is not divisible by 2^" +
                      std::to_string(level));
  }
  return {height / scale, width / scale};
}

}  // namespace sarpn
