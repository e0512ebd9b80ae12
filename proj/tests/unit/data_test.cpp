#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <set>

#include "sarpn/data.hpp"
#include "sarpn/errors.hpp"
#include "sarpn/loss.hpp"
#include "sarpn/metrics.hpp"
#include "sarpn/raster_io.hpp"
#include "test_util.hpp"

namespace sarpn {
namespace {

using testing::TempDir;
using testing::random_map;

bool bit_identical(const FeatureMap& a, const FeatureMap& b) {
  if (a.channels() != b.channels() || !a.same_spatial(b)) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

FeatureMap float_valued(std::mt19937_64& r, int c, int h, int w) {
  FeatureMap m = random_map(r, c, h, w, 0.0, 10.0);
  for (double& v : m.data()) v = static_cast<float>(v);
  return m;
}

TEST(Raster, SinglePixelRoundTrip) {
  DepthMap d = make_depth(1, 1, 1.0);
  const FeatureMap back = decode_raster(encode_raster(d));
  EXPECT_EQ(back.channels(), 1);
  EXPECT_EQ(back.at(0, 0), 1.0);
}

TEST(Raster, HeaderLayout) {
  const std::string bytes = encode_raster(make_depth(2, 3, 0.5));
  const std::string head = "RGBD1\n3 2 1\nlittle-endian\n";
  ASSERT_EQ(bytes.size(), head.size() + 6 * 4);
  EXPECT_EQ(bytes.substr(0, head.size()), head);
  float v;
  std::memcpy(&v, bytes.data() + head.size(), 4);
  EXPECT_EQ(v, 0.5f);
}

TEST(Raster, RandomRoundTripIsBitIdentical) {
  std::mt19937_64 r(1);
  for (int c : {1, 3}) {
    const FeatureMap m = float_valued(r, c, 16, 16);
    const std::string bytes = encode_raster(m);
    const FeatureMap back = decode_raster(bytes);
    EXPECT_TRUE(bit_identical(m, back));
    EXPECT_EQ(encode_raster(back), bytes);
  }
}

TEST(Raster, MalformedHeadersAreFormatErrors) {
  const std::string tail = "little-endian\n";
  auto offset_of = [](const std::string& bytes) -> std::uint64_t {
    try {
      decode_raster(bytes);
    } catch (const FormatError& e) {
      return e.offset();
    }
    ADD_FAILURE() << "no FormatError for: " << bytes.substr(0, 40);
    return 0;
  };
  EXPECT_EQ(offset_of("RGBD2\n1 1 1\n" + tail + "xxxx"), 0u);
  EXPECT_EQ(offset_of("RGBD1\n0 1 1\n" + tail), 6u);
  EXPECT_GE(offset_of("RGBD1\n1 1\n" + tail), 6u);
  EXPECT_GE(offset_of("RGBD1\n1 1 1\nbig-endian\n" + std::string(4, '\0')), 12u);
  EXPECT_GT(offset_of("RGBD1\n1 1 1\n" + tail + "xx"), 0u);
  EXPECT_GT(offset_of("RGBD1\n1 1 1\n" + tail + "xxxxx"), 0u);
  EXPECT_EQ(offset_of(""), 0u);
}

TEST(Raster, SizeOverflowIsFormatError) {
  const std::string tail = "little-endian\n";
  EXPECT_THROW(decode_raster("RGBD1\n99999999999999999999999 1 1\n" + tail), FormatError);
  EXPECT_THROW(decode_raster("RGBD1\n4294967295 4294967295 4294967295\n" + tail), FormatError);
}

TEST(Raster, FileRoundTrip) {
  TempDir dir("raster");
  std::mt19937_64 r(2);
  const FeatureMap m = float_valued(r, 3, 5, 7);
  write_raster(dir / "a.rgb", m);
  EXPECT_TRUE(bit_identical(read_raster(dir / "a.rgb"), m));
  EXPECT_THROW(read_raster(dir / "missing.rgb"), IoError);
}

TEST(Sample, WriteReadIsIdentity) {
  TempDir dir("sample");
  SceneSpec spec;
  spec.seed = 3;
  const RgbdSample s = generate_scene(spec);
  write_sample(s, dir / "x");
  const RgbdSample back = read_sample(dir / "x");
  auto narrowed = [](FeatureMap m) {
    for (double& v : m.data()) v = static_cast<float>(v);
    return m;
  };
  EXPECT_TRUE(bit_identical(back.image, narrowed(s.image)));
  EXPECT_TRUE(bit_identical(back.depth, narrowed(s.depth)));
  const std::string rgb = read_file(dir / "x.rgb");
  write_sample(back, dir / "y");
  EXPECT_EQ(read_file(dir / "y.rgb"), rgb);
  EXPECT_EQ(read_file(dir / "y.dep"), read_file(dir / "x.dep"));
}

TEST(Generate, SameSeedIsBitIdentical) {
  SceneSpec spec;
  spec.seed = 17;
  const RgbdSample a = generate_scene(spec), b = generate_scene(spec);
  EXPECT_TRUE(bit_identical(a.image, b.image));
  EXPECT_TRUE(bit_identical(a.depth, b.depth));
  spec.seed = 18;
  EXPECT_FALSE(bit_identical(a.depth, generate_scene(spec).depth));
}

TEST(Generate, DepthWithinRangeAndImageInUnitInterval) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.min_depth = 0.5 + 0.1 * (seed % 5);
    spec.max_depth = spec.min_depth + 1.0 + (seed % 7);
    spec.n_objects = static_cast<int>(seed % 6);
    const RgbdSample s = generate_scene(spec);
    EXPECT_EQ(s.image.channels(), 3);
    EXPECT_TRUE(s.image.same_spatial(s.depth));
    for (double v : s.depth.data()) {
      if (v == 0.0) continue;
      EXPECT_GE(v, spec.min_depth);
      EXPECT_LE(v, spec.max_depth);
    }
    for (double v : s.image.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

// A background-only scene is a single 3D plane seen by a pinhole camera, so
// its inverse depth is affine in pixel coordinates.
TEST(Generate, PlaneOnlySceneHasAffineInverseDepth) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.n_objects = 0;
    const RgbdSample s = generate_scene(spec);
    const DepthMap& d = s.depth;
    const double resid = testing::affine_fit_residual(
        d.height(), d.width(), [&](int y, int x) { return 1.0 / d.at(y, x); },
        [&](int y, int x) { return d.at(y, x) > 0.0; });
    EXPECT_LT(resid, 1e-6) << "seed " << seed;
  }
}

TEST(Generate, ObjectsProduceDepthEdges) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    SceneSpec spec;
    spec.seed = seed;
    spec.n_objects = 1 + static_cast<int>(seed % 4);
    const DepthMap mag = sobel_magnitude(generate_scene(spec).depth);
    int edges = 0;
    for (double v : mag.data()) edges += v > kEdgeThresholds.front();
    EXPECT_GE(edges, 1) << "seed " << seed;
  }
}

TEST(Generate, InvalidSpecIsConfigError) {
  SceneSpec spec;
  spec.min_depth = 3.0;
  spec.max_depth = 2.0;
  EXPECT_THROW(generate_scene(spec), ConfigError);
  spec = SceneSpec{};
  spec.n_objects = -1;
  EXPECT_THROW(generate_scene(spec), ConfigError);
  spec = SceneSpec{};
  spec.height = 60;
  EXPECT_THROW(spec.validate(5), ConfigError);
  EXPECT_NO_THROW(spec.validate(2));
}

RgbdSample constant_sample(int h, int w, double depth) {
  RgbdSample s;
  s.image = FeatureMap(3, h, w);
  for (double& v : s.image.data()) v = 0.4;
  s.depth = make_depth(h, w, depth);
  return s;
}

TEST(Preprocess, PaperScaleSizes) {
  PreprocessSpec spec;
  spec.precrop_width = 320;
  spec.precrop_height = 240;
  spec.target_width = 304;
  spec.target_height = 228;
  const RgbdSample out = preprocess(constant_sample(480, 640, 2.0), spec);
  EXPECT_EQ(out.image.width(), 304);
  EXPECT_EQ(out.image.height(), 228);
  EXPECT_EQ(out.depth.width(), 152);
  EXPECT_EQ(out.depth.height(), 114);
}

TEST(Preprocess, DeskScaleSizesAndConstants) {
  const PreprocessSpec spec = PreprocessSpec::for_target(64, 64);
  EXPECT_EQ(spec.precrop_height, 72);
  EXPECT_EQ(spec.precrop_width, 72);
  const RgbdSample out = preprocess(constant_sample(128, 128, 3.25), spec);
  EXPECT_EQ(out.image.height(), 64);
  EXPECT_EQ(out.depth.height(), 32);
  EXPECT_EQ(out.depth.width(), 32);
  for (double v : out.depth.data()) EXPECT_NEAR(v, 3.25, 1e-12);
  for (double v : out.image.data()) EXPECT_NEAR(v, 0.4, 1e-12);
  EXPECT_EQ(out.depth.height() % (1 << 5), 0);
}

TEST(Preprocess, TooSmallIsDataError) {
  EXPECT_THROW(preprocess(constant_sample(70, 128, 1.0), PreprocessSpec::for_target(64, 64)),
               DataError);
}

TEST(Preprocess, HolesStayOutOfTheAverage) {
  RgbdSample s = constant_sample(64, 64, 2.0);
  for (int x = 0; x < 64; x += 3) s.depth.at(10, x) = 0.0;
  const RgbdSample out = prepare_sample(s, PreprocessSpec::for_target(64, 64));
  for (double v : out.depth.data()) EXPECT_TRUE(v == 0.0 || std::abs(v - 2.0) < 1e-12) << v;
}

TEST(Preprocess, TargetSizedSamplesSkipThePreCrop) {
  SceneSpec scene;
  scene.seed = 4;
  const RgbdSample s = generate_scene(scene);
  const RgbdSample out = prepare_sample(s, PreprocessSpec::for_target(64, 64));
  EXPECT_TRUE(bit_identical(out.image, s.image));
  EXPECT_EQ(out.depth.height(), 32);
}

TEST(Augment, FlipIsAnInvolution) {
  SceneSpec scene;
  scene.seed = 5;
  const RgbdSample s = generate_scene(scene);
  AugmentDraw flip;
  flip.flip = true;
  const RgbdSample once = apply_augmentation(s, flip);
  EXPECT_FALSE(bit_identical(once.depth, s.depth));
  const RgbdSample twice = apply_augmentation(once, flip);
  EXPECT_TRUE(bit_identical(twice.image, s.image));
  EXPECT_TRUE(bit_identical(twice.depth, s.depth));
}

TEST(Augment, DepthUntouchedWithoutFlipAndDeterministic) {
  SceneSpec scene;
  scene.seed = 6;
  const RgbdSample s = generate_scene(scene);
  int no_flip = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const AugmentDraw draw = draw_augmentation(seed);
    for (double c : draw.color_scale) {
      EXPECT_GE(c, 0.8);
      EXPECT_LE(c, 1.2);
    }
    const RgbdSample a = augment(s, seed), b = augment(s, seed);
    EXPECT_TRUE(bit_identical(a.image, b.image));
    EXPECT_TRUE(bit_identical(a.depth, b.depth));
    if (!draw.flip) {
      ++no_flip;
      EXPECT_TRUE(bit_identical(a.depth, s.depth));
    }
  }
  EXPECT_GT(no_flip, 0);
  EXPECT_LT(no_flip, 40);
}

TEST(Augment, PerfectPredictorLossUnchanged) {
  const LossConfig cfg;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SceneSpec scene;
    scene.seed = seed;
    const RgbdSample s = prepare_sample(generate_scene(scene), PreprocessSpec::for_target(64, 64));
    const auto before = build_gt_pyramid(s.depth, 5);
    const auto after = build_gt_pyramid(augment(s, seed).depth, 5);
    EXPECT_EQ(total_loss(after, after, cfg).total, total_loss(before, before, cfg).total);
  }
}

TEST(Dataset, GenerateWritesIndexAndFiles) {
  TempDir dir("dataset");
  GenerateOptions opts;
  opts.count = 3;
  opts.seed = 9;
  generate_dataset(dir.path(), opts);
  const auto names = read_index(dir / "train");
  ASSERT_EQ(names.size(), 3u);
  EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), 3u);
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "train")) {
    const auto ext = e.path().extension();
    files += ext == ".rgb" || ext == ".dep";
  }
  EXPECT_EQ(files, 6);
  const auto samples = load_split(dir.path(), "train");
  ASSERT_EQ(samples.size(), 3u);
  EXPECT_EQ(samples[0].depth.height(), 64);

  TempDir again("dataset2");
  generate_dataset(again.path(), opts);
  for (const auto& n : names) {
    EXPECT_EQ(read_file(dir / "train" / (n + ".rgb")), read_file(again / "train" / (n + ".rgb")));
    EXPECT_EQ(read_file(dir / "train" / (n + ".dep")), read_file(again / "train" / (n + ".dep")));
  }
}

TEST(Dataset, MissingSplitIsIoError) {
  TempDir dir("empty");
  EXPECT_THROW(load_split(dir.path(), "val"), IoError);
}

TEST(Seeds, MixIsDeterministicAndSpreads) {
  EXPECT_EQ(mix_seed(1, 2), mix_seed(1, 2));
  EXPECT_NE(mix_seed(1, 2), mix_seed(2, 1));
  EXPECT_NE(fnv1a64("train"), fnv1a64("val"));
}

}  // namespace
}  // namespace sarpn
