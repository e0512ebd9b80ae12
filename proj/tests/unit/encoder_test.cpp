#include <gtest/gtest.h>

#include <random>

#include "sarpn/encoder.hpp"
#include "sarpn/errors.hpp"
#include "sarpn/ops.hpp"
#include "test_util.hpp"

namespace sarpn {
namespace {

using testing::central_difference;
using testing::max_abs_diff;
using testing::random_map;
using testing::relative_error;
using testing::weighted_sum;

EncoderConfig small_config(int h, int w, int levels) {
  EncoderConfig c;
  c.levels = levels;
  c.height = h;
  c.width = w;
  c.stage_channels.clear();
  for (int i = 0; i < levels; ++i) c.stage_channels.push_back(4 * (i + 1));
  return c;
}

TEST(Encoder, PyramidSizesHalvePerLevel) {
  ParameterStore store;
  Rng rng(1);
  EncoderConfig cfg;  // 64x64, five levels
  Encoder enc(store, cfg, rng);
  std::mt19937_64 r(2);
  const auto maps = enc.encode(random_map(r, 3, 64, 64, 0, 1));
  ASSERT_EQ(maps.size(), 5u);
  const int expected[5] = {32, 16, 8, 4, 2};
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(maps[i].height(), expected[i]);
    EXPECT_EQ(maps[i].width(), expected[i]);
    EXPECT_EQ(maps[i].channels(), cfg.stage_channels[i]);
  }
}

TEST(Encoder, RejectsIndivisibleInput) {
  EncoderConfig cfg = small_config(60, 64, 3);
  EXPECT_THROW(cfg.validate(), ConfigError);
  ParameterStore store;
  Rng rng(1);
  EXPECT_THROW(Encoder(store, cfg, rng), ConfigError);
}

TEST(Encoder, RejectsWrongImageSize) {
  ParameterStore store;
  Rng rng(1);
  Encoder enc(store, small_config(16, 16, 2), rng);
  EXPECT_THROW(enc.encode(FeatureMap(3, 32, 16)), ConfigError);
  EXPECT_THROW(enc.encode(FeatureMap(1, 16, 16)), ConfigError);
}

TEST(Encoder, DeterministicForSeedAndImage) {
  std::mt19937_64 r(3);
  const FeatureMap img = random_map(r, 3, 32, 32, 0, 1);
  ParameterStore s1, s2;
  Rng a(7), b(7);
  Encoder e1(s1, small_config(32, 32, 3), a);
  Encoder e2(s2, small_config(32, 32, 3), b);
  const auto m1 = e1.encode(img);
  const auto m2 = e2.encode(img);
  for (std::size_t i = 0; i < m1.size(); ++i) EXPECT_EQ(m1[i], m2[i]);
  const auto again = e1.encode(img);
  for (std::size_t i = 0; i < m1.size(); ++i) EXPECT_EQ(m1[i], again[i]);
}

TEST(SeBlock, RejectsIndivisibleReduction) {
  ParameterStore store;
  Rng rng(1);
  EXPECT_THROW(SeBlock(store, "se", 6, 4, rng), ConfigError);
}

TEST(SeBlock, UnitAndZeroGates) {
  ParameterStore store;
  Rng rng(1);
  SeBlock se(store, "se", 4, 2, rng);
  std::mt19937_64 r(2);
  const FeatureMap x = random_map(r, 4, 5, 3);
  zero_parameters(se.excite());
  se.excite().bias().value.fill(1000.0);
  EXPECT_EQ(se.apply(x), x);
  se.excite().bias().value.fill(-1000.0);
  const FeatureMap gated = se.apply(x);
  for (double v : gated.data()) EXPECT_EQ(v, 0.0);
}

TEST(SeBlock, MatchesCompositionOracle) {
  ParameterStore store;
  Rng rng(4);
  SeBlock se(store, "se", 4, 2, rng);
  std::mt19937_64 r(5);
  for (Parameter* p : {&se.squeeze().weight(), &se.squeeze().bias(), &se.excite().weight(),
                       &se.excite().bias()}) {
    for (double& v : p->value.data()) v = std::uniform_real_distribution<double>(-1, 1)(r);
  }
  const FeatureMap x = random_map(r, 4, 6, 5);

  const auto pooled = global_avg_pool(x);
  const auto w1 = se.squeeze().weights(), b1 = se.squeeze().biases();
  const auto w2 = se.excite().weights(), b2 = se.excite().biases();
  std::vector<double> hidden(2), gate(4);
  for (int j = 0; j < 2; ++j) {
    double acc = b1[j];
    for (int c = 0; c < 4; ++c) acc += w1[j * 4 + c] * pooled[c];
    hidden[j] = std::max(0.0, acc);
  }
  for (int c = 0; c < 4; ++c) {
    double acc = b2[c];
    for (int j = 0; j < 2; ++j) acc += w2[c * 2 + j] * hidden[j];
    gate[c] = 1.0 / (1.0 + std::exp(-acc));
  }
  EXPECT_LT(max_abs_diff(se.apply(x), scale_channels(x, gate)), 1e-9);
  const auto g = se.gate(x);
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(g[c], gate[c], 1e-12);
}

TEST(SeBlock, GatesInOpenUnitIntervalAndShapeKept) {
  ParameterStore store;
  Rng rng(6);
  SeBlock se(store, "se", 8, 4, rng);
  std::mt19937_64 r(7);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMap x = random_map(r, 8, 4, 4, -3, 3);
    const FeatureMap y = se.apply(x);
    ASSERT_TRUE(y.same_shape(x));
    const auto g = se.gate(x);
    for (int c = 0; c < 8; ++c) {
      EXPECT_GT(g[c], 0.0);
      EXPECT_LT(g[c], 1.0);
      for (int i = 0; i < 16; ++i) EXPECT_EQ(y.channel(c)[i], g[c] * x.channel(c)[i]);
    }
  }
}

TEST(SeBlock, ExcitationStartsNearHalfGate) {
  ParameterStore store;
  Rng rng(8);
  SeBlock se(store, "se", 16, 4, rng);
  std::mt19937_64 r(9);
  for (double g : se.gate(random_map(r, 16, 4, 4, 0, 1))) EXPECT_NEAR(g, 0.5, 0.05);
}

TEST(Encoder, FirstStageWeightGradientsMatchFiniteDifferences) {
  ParameterStore store;
  Rng rng(10);
  Encoder enc(store, small_config(8, 8, 2), rng);
  std::mt19937_64 r(11);
  const FeatureMap img = random_map(r, 3, 8, 8, 0, 1);
  const auto maps = enc.encode(img);
  std::vector<FeatureMap> weights;
  for (const auto& m : maps) weights.push_back(random_map(r, m.channels(), m.height(), m.width()));
  auto loss = [&] {
    const auto out = enc.encode(img);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += weighted_sum(out[i], weights[i]);
    return s;
  };
  store.zero_grad();
  Tape tape;
  const auto vars = enc.forward(tape, tape.input(img));
  for (std::size_t i = 0; i < vars.size(); ++i) tape.seed(vars[i], weights[i]);
  tape.backward();
  const Conv2d& first = enc.stages()[0].down();
  for (std::size_t i = 0; i < first.weight().value.size(); ++i) {
    const double numeric = central_difference(loss, first.weight().value.data()[i]);
    EXPECT_LT(relative_error(first.weight().grad.data()[i], numeric), 1e-4) << i;
  }
}

}  // namespace
}  // namespace sarpn
