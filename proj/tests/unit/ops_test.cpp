#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sarpn/errors.hpp"
#include "sarpn/ops.hpp"
#include "sarpn/tape.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace sarpn {
namespace {

using testing::bilinear_at;
using testing::central_difference;
using testing::max_abs_diff;
using testing::random_map;
using testing::relative_error;
using testing::weighted_sum;

// Independent direct-summation convolution.
FeatureMap conv_oracle(const FeatureMap& in, const ConvSpec& s, const std::vector<double>& w,
                       const std::vector<double>& b) {
  const int oh = (in.height() + 2 * s.padding - s.kernel_size) / s.stride + 1;
  const int ow = (in.width() + 2 * s.padding - s.kernel_size) / s.stride + 1;
  FeatureMap out(s.out_channels, oh, ow);
  for (int o = 0; o < s.out_channels; ++o) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = b[o];
        for (int i = 0; i < s.in_channels; ++i) {
          for (int ky = 0; ky < s.kernel_size; ++ky) {
            for (int kx = 0; kx < s.kernel_size; ++kx) {
              const int iy = y * s.stride + ky - s.padding;
              const int ix = x * s.stride + kx - s.padding;
              if (iy < 0 || ix < 0 || iy >= in.height() || ix >= in.width()) continue;
              acc += w[((o * s.in_channels + i) * s.kernel_size + ky) * s.kernel_size + kx] *
                     in(i, iy, ix);
            }
          }
        }
        out(o, y, x) = acc;
      }
    }
  }
  return out;
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

TEST(Conv2d, IdentityKernelReproducesInput) {
  std::mt19937_64 rng(1);
  const FeatureMap in = random_map(rng, 3, 5, 4);
  const ConvSpec spec{3, 3, 1, 1, 0};
  std::vector<double> w(9, 0.0);
  for (int c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
  EXPECT_EQ(conv2d(in, spec, w, std::vector<double>(3, 0.0)), in);
}

TEST(Conv2d, AveragingKernelPreservesConstant) {
  const FeatureMap in(1, 5, 5, 2.75);
  const ConvSpec spec{1, 1, 3, 1, 0};
  const FeatureMap out = conv2d(in, spec, std::vector<double>(9, 1.0 / 9.0), std::vector<double>{0.0});
  ASSERT_EQ(out.height(), 3);
  ASSERT_EQ(out.width(), 3);
  for (double v : out.data()) EXPECT_NEAR(v, 2.75, 1e-12);
}

TEST(Conv2d, MatchesDirectSummation) {
  std::mt19937_64 rng(2);
  const FeatureMap in = random_map(rng, 1, 4, 4);
  const ConvSpec spec{1, 1, 3, 1, 1};
  const auto w = random_vec(rng, 9);
  const auto b = random_vec(rng, 1);
  EXPECT_LT(max_abs_diff(conv2d(in, spec, w, b), conv_oracle(in, spec, w, b)), 1e-9);
}

TEST(Conv2d, MatchesDirectSummationStridedMultiChannel) {
  std::mt19937_64 rng(3);
  for (const ConvSpec spec : {ConvSpec{3, 5, 3, 2, 1}, ConvSpec{4, 2, 5, 1, 2},
                              ConvSpec{2, 3, 1, 1, 0}, ConvSpec{2, 2, 3, 3, 0}}) {
    const FeatureMap in = random_map(rng, spec.in_channels, 9, 7);
    const auto w = random_vec(rng, spec.weight_count());
    const auto b = random_vec(rng, spec.out_channels);
    EXPECT_LT(max_abs_diff(conv2d(in, spec, w, b), conv_oracle(in, spec, w, b)), 1e-9);
  }
}

TEST(Conv2d, RejectsChannelMismatchAndEmptyOutput) {
  const FeatureMap in(2, 4, 4);
  EXPECT_THROW(conv2d(in, ConvSpec{3, 1, 3, 1, 1}, std::vector<double>(27), std::vector<double>(1)),
               ConfigError);
  EXPECT_THROW(conv2d(in, ConvSpec{2, 1, 5, 1, 0}, std::vector<double>(50), std::vector<double>(1)),
               ConfigError);
  EXPECT_THROW((ConvSpec{2, 1, 4, 1, 0}.validate()), ConfigError);
}

TEST(Conv2d, LinearInInputAndWeights) {
  std::mt19937_64 rng(4);
  const ConvSpec spec{2, 3, 3, 1, 1};
  const FeatureMap x = random_map(rng, 2, 6, 5);
  const FeatureMap y = random_map(rng, 2, 6, 5);
  const auto w = random_vec(rng, spec.weight_count());
  const auto v = random_vec(rng, spec.weight_count());
  const std::vector<double> zero(3, 0.0);
  const double a = 0.7, b = -1.3;

  FeatureMap xy(2, 6, 5);
  for (std::size_t i = 0; i < xy.size(); ++i) xy.data()[i] = a * x.data()[i] + b * y.data()[i];
  FeatureMap lhs = conv2d(xy, spec, w, zero);
  FeatureMap rhs = conv2d(x, spec, w, zero);
  rhs *= a;
  FeatureMap ry = conv2d(y, spec, w, zero);
  ry *= b;
  rhs += ry;
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-9);

  std::vector<double> wv(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) wv[i] = a * w[i] + b * v[i];
  lhs = conv2d(x, spec, wv, zero);
  rhs = conv2d(x, spec, w, zero);
  rhs *= a;
  FeatureMap rv = conv2d(x, spec, v, zero);
  rv *= b;
  rhs += rv;
  EXPECT_LT(max_abs_diff(lhs, rhs), 1e-9);
}

TEST(BilinearResize, SameSizeIsIdentity) {
  std::mt19937_64 rng(5);
  const FeatureMap in = random_map(rng, 2, 3, 4);
  EXPECT_EQ(bilinear_resize(in, 3, 4), in);
}

TEST(BilinearResize, PreservesCorners) {
  FeatureMap in(1, 2, 2);
  in(0, 0, 0) = 0;
  in(0, 0, 1) = 1;
  in(0, 1, 0) = 2;
  in(0, 1, 1) = 3;
  const FeatureMap out = bilinear_resize(in, 4, 4);
  EXPECT_EQ(out(0, 0, 0), 0.0);
  EXPECT_EQ(out(0, 0, 3), 1.0);
  EXPECT_EQ(out(0, 3, 0), 2.0);
  EXPECT_EQ(out(0, 3, 3), 3.0);
}

TEST(BilinearResize, MatchesPointwiseFormula) {
  std::mt19937_64 rng(6);
  const FeatureMap in = random_map(rng, 1, 3, 5);
  const FeatureMap out = bilinear_resize(in, 7, 11);
  for (int y = 0; y < 7; ++y) {
    for (int x = 0; x < 11; ++x) EXPECT_NEAR(out(0, y, x), bilinear_at(in, 0, y, x, 7, 11), 1e-9);
  }
}

TEST(BilinearResize, DownsamplingAndSingleRowMatchFormula) {
  std::mt19937_64 rng(7);
  const FeatureMap in = random_map(rng, 2, 9, 6);
  for (auto [oh, ow] : {std::pair{4, 3}, std::pair{1, 5}, std::pair{3, 1}, std::pair{1, 1}}) {
    const FeatureMap out = bilinear_resize(in, oh, ow);
    for (int c = 0; c < 2; ++c) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          EXPECT_NEAR(out(c, y, x), bilinear_at(in, c, y, x, oh, ow), 1e-9);
        }
      }
    }
  }
}

TEST(BilinearResize, RejectsNonPositiveSize) {
  const FeatureMap in(1, 2, 2);
  EXPECT_THROW(bilinear_resize(in, 0, 3), ConfigError);
  EXPECT_THROW(bilinear_resize(in, 3, -1), ConfigError);
}

TEST(BilinearResize, IsLinear) {
  std::mt19937_64 rng(8);
  const FeatureMap x = random_map(rng, 2, 4, 5);
  const FeatureMap y = random_map(rng, 2, 4, 5);
  const double a = 1.7, b = -0.4;
  FeatureMap xy(2, 4, 5);
  for (std::size_t i = 0; i < xy.size(); ++i) xy.data()[i] = a * x.data()[i] + b * y.data()[i];
  FeatureMap rhs = bilinear_resize(x, 9, 3);
  rhs *= a;
  FeatureMap ry = bilinear_resize(y, 9, 3);
  ry *= b;
  rhs += ry;
  EXPECT_LT(max_abs_diff(bilinear_resize(xy, 9, 3), rhs), 1e-9);
}

TEST(GlobalAvgPool, ConstantAndSmallExample) {
  EXPECT_EQ(global_avg_pool(FeatureMap(3, 4, 2, 1.5)), (std::vector<double>{1.5, 1.5, 1.5}));
  FeatureMap m(1, 2, 2);
  m(0, 0, 0) = 1;
  m(0, 0, 1) = 2;
  m(0, 1, 0) = 3;
  m(0, 1, 1) = 4;
  EXPECT_DOUBLE_EQ(global_avg_pool(m)[0], 2.5);
}

TEST(GlobalAvgPool, MatchesSummationOracle) {
  std::mt19937_64 rng(9);
  const FeatureMap m = random_map(rng, 4, 6, 6);
  const auto pooled = global_avg_pool(m);
  for (int c = 0; c < 4; ++c) {
    double s = 0.0;
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 6; ++x) s += m(c, y, x);
    }
    EXPECT_NEAR(pooled[c], s / 36.0, 1e-12);
  }
}

TEST(ConcatChannels, UnaryOrderAndCount) {
  std::mt19937_64 rng(10);
  const FeatureMap a = random_map(rng, 1, 2, 2);
  const FeatureMap b = random_map(rng, 1, 2, 2);
  EXPECT_EQ(concat_channels(std::vector<FeatureMap>{a}), a);
  const FeatureMap ab = concat_channels(std::vector<FeatureMap>{a, b});
  ASSERT_EQ(ab.channels(), 2);
  EXPECT_EQ(slice_channels(ab, 0, 1), a);
  EXPECT_EQ(slice_channels(ab, 1, 1), b);
  const FeatureMap big = concat_channels(std::vector<FeatureMap>{
      FeatureMap(3, 4, 4), FeatureMap(5, 4, 4), FeatureMap(8, 4, 4)});
  EXPECT_EQ(big.channels(), 16);
}

TEST(ConcatChannels, SliceRecoversOriginals) {
  std::mt19937_64 rng(11);
  const std::vector<FeatureMap> parts{random_map(rng, 3, 3, 5), random_map(rng, 1, 3, 5),
                                      random_map(rng, 4, 3, 5)};
  const FeatureMap all = concat_channels(parts);
  int first = 0;
  for (const auto& p : parts) {
    EXPECT_EQ(slice_channels(all, first, p.channels()), p);
    first += p.channels();
  }
}

TEST(ConcatChannels, RejectsSpatialMismatch) {
  EXPECT_THROW(concat_channels(std::vector<FeatureMap>{FeatureMap(1, 2, 2), FeatureMap(1, 2, 3)}),
               ConfigError);
}

TEST(AvgPool2x2, BlockMeansAndHoleSkipping) {
  FeatureMap m(1, 2, 4);
  const double v[8] = {1, 3, 0, 4, 5, 7, 0, 0};
  std::copy(v, v + 8, m.data().begin());
  const FeatureMap plain = avg_pool2x2(m);
  EXPECT_DOUBLE_EQ(plain(0, 0, 0), 4.0);
  EXPECT_DOUBLE_EQ(plain(0, 0, 1), 1.0);
  const FeatureMap skipped = avg_pool2x2(m, true);
  EXPECT_DOUBLE_EQ(skipped(0, 0, 0), 4.0);
  EXPECT_DOUBLE_EQ(skipped(0, 0, 1), 4.0);
  FeatureMap holes(1, 2, 2, 0.0);
  EXPECT_DOUBLE_EQ(avg_pool2x2(holes, true)(0, 0, 0), 0.0);
}

TEST(Activations, FiniteOnExtremeInputs) {
  FeatureMap m(1, 1, 4);
  m(0, 0, 0) = -1e308;
  m(0, 0, 1) = 1e308;
  m(0, 0, 2) = -800;
  m(0, 0, 3) = 800;
  const FeatureMap s = sigmoid(m);
  for (double v : s.data()) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  const FeatureMap r = relu(m);
  for (double v : r.data()) EXPECT_TRUE(std::isfinite(v));
}

// ---- differentiation contract: every tape op against central differences ----

using Builder = std::function<Var(Tape&, std::vector<Var>&)>;

void check_input_gradients(std::vector<FeatureMap> inputs, const Builder& build, unsigned seed) {
  std::mt19937_64 rng(seed);
  FeatureMap weights;
  {
    Tape probe;
    std::vector<Var> vars;
    for (const auto& in : inputs) vars.push_back(probe.input(in));
    const FeatureMap& out = probe.value(build(probe, vars));
    weights = random_map(rng, out.channels(), out.height(), out.width());
  }
  Tape tape;
  std::vector<Var> vars;
  for (const auto& in : inputs) vars.push_back(tape.input(in, true));
  const Var out = build(tape, vars);
  tape.seed(out, weights);
  tape.backward();

  auto loss = [&] {
    Tape t;
    std::vector<Var> vs;
    for (const auto& in : inputs) vs.push_back(t.input(in));
    return weighted_sum(t.value(build(t, vs)), weights);
  };
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const FeatureMap analytic = tape.grad(vars[k]);
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double numeric = central_difference(loss, inputs[k].data()[i]);
      EXPECT_LT(relative_error(analytic.data()[i], numeric), 1e-4)
          << "input " << k << " element " << i << ": " << analytic.data()[i] << " vs " << numeric;
    }
  }
}

TEST(TapeGradients, Conv) {
  std::mt19937_64 rng(20);
  for (const ConvSpec spec : {ConvSpec{2, 3, 3, 1, 1}, ConvSpec{3, 2, 3, 2, 1},
                              ConvSpec{2, 2, 1, 1, 0}}) {
    ParameterStore store;
    Rng init(21);
    Conv2d layer(store, "c", spec, init);
    for (double& b : layer.bias().value.data()) b = std::uniform_real_distribution<double>(-1, 1)(rng);
    const FeatureMap x = random_map(rng, spec.in_channels, 6, 5);
    check_input_gradients({x}, [&](Tape& t, std::vector<Var>& v) { return t.conv(v[0], layer); }, 22);

    // weights and bias
    const FeatureMap wts = [&] {
      const FeatureMap o = layer.apply(x);
      return random_map(rng, o.channels(), o.height(), o.width());
    }();
    store.zero_grad();
    Tape tape;
    const Var out = tape.conv(tape.input(x), layer);
    tape.seed(out, wts);
    tape.backward();
    auto loss = [&] { return weighted_sum(layer.apply(x), wts); };
    for (Parameter* p : {&layer.weight(), &layer.bias()}) {
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        const double numeric = central_difference(loss, p->value.data()[i]);
        EXPECT_LT(relative_error(p->grad.data()[i], numeric), 1e-4) << p->name << "[" << i << "]";
      }
    }
  }
}

TEST(TapeGradients, ReluSigmoidAdd) {
  std::mt19937_64 rng(23);
  // keep ReLU inputs away from the kink
  FeatureMap x = random_map(rng, 2, 4, 4);
  for (double& v : x.data()) v += v >= 0 ? 0.1 : -0.1;
  check_input_gradients({x}, [](Tape& t, std::vector<Var>& v) { return t.relu(v[0]); }, 24);
  check_input_gradients({random_map(rng, 2, 3, 3, -4, 4)},
                        [](Tape& t, std::vector<Var>& v) { return t.sigmoid(v[0]); }, 25);
  check_input_gradients({random_map(rng, 2, 3, 3), random_map(rng, 2, 3, 3)},
                        [](Tape& t, std::vector<Var>& v) { return t.add(v[0], v[1]); }, 26);
  // the same node used twice
  check_input_gradients({random_map(rng, 1, 3, 3)},
                        [](Tape& t, std::vector<Var>& v) { return t.add(v[0], v[0]); }, 27);
}

TEST(TapeGradients, Resize) {
  std::mt19937_64 rng(28);
  for (auto [ih, iw, oh, ow] : {std::array{2, 3, 5, 7}, std::array{8, 6, 4, 3},
                                std::array{3, 3, 1, 1}, std::array{4, 4, 4, 4}}) {
    check_input_gradients({random_map(rng, 2, ih, iw)},
                          [oh = oh, ow = ow](Tape& t, std::vector<Var>& v) {
                            return t.resize(v[0], oh, ow);
                          },
                          29);
  }
}

TEST(TapeGradients, ConcatPoolScale) {
  std::mt19937_64 rng(30);
  check_input_gradients({random_map(rng, 2, 3, 4), random_map(rng, 3, 3, 4)},
                        [](Tape& t, std::vector<Var>& v) {
                          return t.concat(std::span<const Var>(v.data(), 2));
                        },
                        31);
  check_input_gradients({random_map(rng, 3, 4, 5)},
                        [](Tape& t, std::vector<Var>& v) { return t.global_avg_pool(v[0]); }, 32);
  check_input_gradients({random_map(rng, 3, 4, 5), random_map(rng, 3, 1, 1)},
                        [](Tape& t, std::vector<Var>& v) { return t.scale_channels(v[0], v[1]); },
                        33);
}

TEST(Parameters, StoreRejectsDuplicateNames) {
  ParameterStore store;
  store.create("a", 1, 1, 1);
  EXPECT_THROW(store.create("a", 1, 1, 1), ConfigError);
  EXPECT_NE(store.find("a"), nullptr);
  EXPECT_EQ(store.find("b"), nullptr);
}

TEST(Parameters, InitialisationIsFloatRepresentableAndSeeded) {
  ParameterStore s1, s2;
  Rng r1(5), r2(5);
  Conv2d a(s1, "c", {4, 4, 3, 1, 1}, r1);
  Conv2d b(s2, "c", {4, 4, 3, 1, 1}, r2);
  EXPECT_EQ(a.weight().value, b.weight().value);
  for (double v : a.weight().value.data()) EXPECT_EQ(v, static_cast<double>(static_cast<float>(v)));
}

}  // namespace
}  // namespace sarpn
