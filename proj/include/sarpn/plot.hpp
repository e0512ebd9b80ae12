#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sarpn/feature_map.hpp"
#include "sarpn/trainer.hpp"

namespace sarpn {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  RgbImage() = default;
  RgbImage(int w, int h, std::array<std::uint8_t, 3> fill);
  std::array<std::uint8_t, 3> pixel(int x, int y) const;
  void set(int x, int y, std::array<std::uint8_t, 3> color);
};

/// Binary PPM (P6).
std::string encode_ppm(const RgbImage& image);

/// Perceptual (viridis-like) colormap; t is clamped to [0, 1].
std::array<std::uint8_t, 3> colormap(double t);

/// False-color depth image: near is dark, far is bright. Holes (<= 0) are
/// black. A constant map renders with the colormap's low end everywhere.
RgbImage render_depth(const DepthMap& depth);

struct LossPlot {
  RgbImage image;
  /// Pixel row of the total-loss polyline at each column of the plot area.
  std::vector<int> samples;
};

/// Total loss against epoch, drawn as a polyline over a plot area with axes.
LossPlot plot_loss_curve(const std::vector<EpochLog>& log, int width = 480, int height = 320);

}  // namespace sarpn
