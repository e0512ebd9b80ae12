#include "sarpn/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sarpn/errors.hpp"

namespace sarpn {
namespace {

// Anchors sampled from the viridis colormap.
constexpr std::array<std::array<double, 3>, 9> kAnchors{{
    {68, 1, 84},
    {71, 44, 122},
    {59, 81, 139},
    {44, 113, 142},
    {33, 144, 141},
    {39, 173, 129},
    {92, 200, 99},
    {170, 220, 50},
    {253, 231, 37},
}};

constexpr std::array<std::uint8_t, 3> kWhite{255, 255, 255};
constexpr std::array<std::uint8_t, 3> kAxis{40, 40, 40};
constexpr std::array<std::uint8_t, 3> kLine{200, 30, 30};
constexpr int kMargin = 24;

}  // namespace

RgbImage::RgbImage(int w, int h, std::array<std::uint8_t, 3> fill) : width(w), height(h) {
  if (w <= 0 || h <= 0) throw ConfigError("image size must be positive");
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    std::copy(fill.begin(), fill.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i));
  }
}

std::array<std::uint8_t, 3> RgbImage::pixel(int x, int y) const {
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  return {pixels[i], pixels[i + 1], pixels[i + 2]};
}

void RgbImage::set(int x, int y, std::array<std::uint8_t, 3> color) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
  std::copy(color.begin(), color.end(), pixels.begin() + static_cast<std::ptrdiff_t>(i));
}

std::string encode_ppm(const RgbImage& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

std::array<std::uint8_t, 3> colormap(double t) {
  if (!(t >= 0.0)) t = 0.0;
  t = std::min(t, 1.0);
  const double pos = t * (kAnchors.size() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(pos), kAnchors.size() - 2);
  const double f = pos - static_cast<double>(i);
  std::array<std::uint8_t, 3> out{};
  for (int c = 0; c < 3; ++c) {
    const double v = kAnchors[i][c] * (1.0 - f) + kAnchors[i + 1][c] * f;
    out[c] = static_cast<std::uint8_t>(std::lround(v));
  }
  return out;
}

RgbImage render_depth(const DepthMap& depth) {
  if (depth.empty()) throw DataError("cannot render an empty depth map");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : depth.channel(0)) {
    if (v > 0.0 && std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  RgbImage out(depth.width(), depth.height(), {0, 0, 0});
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double v = depth.at(y, x);
      if (!(v > 0.0) || !std::isfinite(v)) continue;
      out.set(x, y, colormap(hi > lo ? (v - lo) / (hi - lo) : 0.0));
    }
  }
  return out;
}

LossPlot plot_loss_curve(const std::vector<EpochLog>& log, int width, int height) {
  if (log.empty()) throw DataError("loss log has no rows to plot");
  if (width <= 2 * kMargin + 1 || height <= 2 * kMargin + 1) {
    throw ConfigError("plot size too small");
  }
  for (const auto& e : log) {
    if (!std::isfinite(e.total)) throw DataError("loss log holds a non-finite value");
  }
  LossPlot plot{RgbImage(width, height, kWhite), {}};
  const int x0 = kMargin, x1 = width - kMargin - 1;
  const int y0 = kMargin, y1 = height - kMargin - 1;
  for (int x = x0; x <= x1; ++x) plot.image.set(x, y1 + 1, kAxis);
  for (int y = y0; y <= y1 + 1; ++y) plot.image.set(x0 - 1, y, kAxis);

  double lo = log.front().total, hi = lo;
  for (const auto& e : log) {
    lo = std::min(lo, e.total);
    hi = std::max(hi, e.total);
  }
  const double span = hi > lo ? hi - lo : 1.0;
  auto row_of = [&](double v) {
    return y1 - static_cast<int>(std::lround((v - lo) / span * (y1 - y0)));
  };

  const std::size_t n = log.size();
  plot.samples.reserve(static_cast<std::size_t>(x1 - x0 + 1));
  for (int x = x0; x <= x1; ++x) {
    double value = log.front().total;
    if (n > 1) {
      const double pos = static_cast<double>(x - x0) / (x1 - x0) * (n - 1);
      const std::size_t i = std::min(static_cast<std::size_t>(pos), n - 2);
      const double f = pos - static_cast<double>(i);
      value = log[i].total * (1.0 - f) + log[i + 1].total * f;
    }
    plot.samples.push_back(row_of(value));
  }
  for (std::size_t k = 0; k < plot.samples.size(); ++k) {
    const int x = x0 + static_cast<int>(k);
    const int prev = k > 0 ? plot.samples[k - 1] : plot.samples[k];
    const int a = std::min(prev, plot.samples[k]);
    const int b = std::max(prev, plot.samples[k]);
    for (int y = a; y <= b; ++y) plot.image.set(x, y, kLine);
  }
  return plot;
}

}  // namespace sarpn
