#include <gtest/gtest.h>

#include <set>

#include "sarpn/errors.hpp"
#include "sarpn/plot.hpp"

namespace sarpn {
namespace {

TEST(Colormap, EndsAndMonotoneBrightness) {
  const auto lo = colormap(0.0), hi = colormap(1.0);
  EXPECT_EQ(colormap(-3.0), lo);
  EXPECT_EQ(colormap(7.0), hi);
  auto luma = [](std::array<std::uint8_t, 3> c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; };
  double prev = -1.0;
  for (int i = 0; i <= 20; ++i) {
    const double l = luma(colormap(i / 20.0));
    EXPECT_GE(l + 1.0, prev);
    prev = l;
  }
  EXPECT_GT(luma(hi), luma(lo) + 100.0);
}

TEST(RenderDepth, ConstantMapIsSingleColor) {
  const RgbImage img = render_depth(make_depth(7, 9, 2.5));
  EXPECT_EQ(img.width, 9);
  EXPECT_EQ(img.height, 7);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 9; ++x) EXPECT_EQ(img.pixel(x, y), img.pixel(0, 0));
  }
}

TEST(RenderDepth, HolesAreBlackAndFarIsBrighter) {
  DepthMap d = make_depth(2, 3, 1.0);
  d.at(0, 1) = 0.0;
  d.at(1, 2) = 4.0;
  const RgbImage img = render_depth(d);
  EXPECT_EQ(img.pixel(1, 0), (std::array<std::uint8_t, 3>{0, 0, 0}));
  EXPECT_EQ(img.pixel(2, 1), colormap(1.0));
  EXPECT_EQ(img.pixel(0, 0), colormap(0.0));
}

TEST(Ppm, HeaderAndSize) {
  const RgbImage img(3, 2, {10, 20, 30});
  const std::string bytes = encode_ppm(img);
  const std::string head = "P6\n3 2\n255\n";
  ASSERT_EQ(bytes.size(), head.size() + 18);
  EXPECT_EQ(bytes.substr(0, head.size()), head);
  EXPECT_EQ(static_cast<unsigned char>(bytes[head.size() + 2]), 30);
}

std::vector<EpochLog> decreasing_log(int n) {
  std::vector<EpochLog> log;
  for (int e = 0; e < n; ++e) log.push_back({e, 1e-4, -1.0 - 0.7 * e + 0.01 * e * e, 0, 0, 0});
  return log;
}

TEST(LossCurve, MonotoneLossGivesMonotoneSamples) {
  const LossPlot plot = plot_loss_curve(decreasing_log(12));
  EXPECT_EQ(plot.image.width, 480);
  EXPECT_EQ(plot.image.height, 320);
  ASSERT_GT(plot.samples.size(), 100u);
  // image rows grow downward, so a falling loss has non-decreasing rows
  for (std::size_t i = 1; i < plot.samples.size(); ++i) {
    EXPECT_GE(plot.samples[i], plot.samples[i - 1]);
  }
  EXPECT_LT(plot.samples.front(), plot.samples.back());
}

TEST(LossCurve, DeterministicAndHandlesFlatCurves) {
  const auto log = decreasing_log(5);
  EXPECT_EQ(encode_ppm(plot_loss_curve(log).image), encode_ppm(plot_loss_curve(log).image));
  std::vector<EpochLog> flat{{0, 1e-4, -2.0, 0, 0, 0}};
  const LossPlot p = plot_loss_curve(flat);
  EXPECT_EQ(std::set<int>(p.samples.begin(), p.samples.end()).size(), 1u);
}

TEST(LossCurve, RejectsEmptyOrNonFiniteLogs) {
  EXPECT_THROW(plot_loss_curve({}), DataError);
  std::vector<EpochLog> bad{{0, 1e-4, std::nan(""), 0, 0, 0}};
  EXPECT_THROW(plot_loss_curve(bad), DataError);
  EXPECT_THROW(parse_epoch_csv("epoch,lr,total_loss\n"), FormatError);
}

}  // namespace
}  // namespace sarpn
