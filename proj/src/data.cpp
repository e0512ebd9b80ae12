#include "sarpn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "sarpn/errors.hpp"
#include "sarpn/ops.hpp"
#include "sarpn/raster_io.hpp"

namespace sarpn {
namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Bilinear resize that ignores holes (<= 0); pixels with no valid tap are 0.
DepthMap resize_depth(const DepthMap& in, int out_h, int out_w) {
  if (in.height() == out_h && in.width() == out_w) return in;
  DepthMap valid = make_depth(in.height(), in.width());
  DepthMap masked = make_depth(in.height(), in.width());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double v = in.data()[i];
    valid.data()[i] = v > 0.0 ? 1.0 : 0.0;
    masked.data()[i] = v > 0.0 ? v : 0.0;
  }
  const DepthMap num = bilinear_resize(masked, out_h, out_w);
  const DepthMap den = bilinear_resize(valid, out_h, out_w);
  DepthMap out = make_depth(out_h, out_w);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = den.data()[i];
    out.data()[i] = d > 1e-12 ? num.data()[i] / d : 0.0;
  }
  return out;
}

FeatureMap crop(const FeatureMap& in, int top, int left, int h, int w) {
  FeatureMap out(in.channels(), h, w);
  for (int c = 0; c < in.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out(c, y, x) = in(c, top + y, left + x);
    }
  }
  return out;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

void SceneSpec::validate(int levels) const {
  if (height < 2 || width < 2) throw ConfigError("scene size must be at least 2x2");
  if (!(min_depth > 0.0) || !(max_depth > min_depth)) {
    throw ConfigError("scene depth range must satisfy 0 < min < max");
  }
  if (n_objects < 0) throw ConfigError("n_objects must be non-negative");
  if (levels > 0) (void)level_size(height, width, levels);
}

RgbdSample generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const int h = spec.height;
  const int w = spec.width;
  const double range = spec.max_depth - spec.min_depth;

  // Background: a true 3D plane seen through the synthetic pinhole camera
  // (fx = fy = W, principal point at the image center), so inverse depth is
  // affine in the normalized ray coordinates.
  const double u_max = 0.5 * (w - 1) / w;
  const double v_max = 0.5 * (h - 1) / w;
  const double tilt_x = uniform(rng, -0.3, 0.3);
  const double tilt_y = uniform(rng, -0.3, 0.3) / std::max(1.0, 2.0 * v_max);
  const double spread = std::abs(tilt_x) * u_max + std::abs(tilt_y) * v_max;
  const double f_min = 1.0 - spread;
  const double f_max = 1.0 + spread;
  const double far = uniform(rng, spec.min_depth + 0.7 * range, spec.max_depth);
  const double center = far * f_min;
  const double plane_min = center / f_max;
  auto plane = [&](int y, int x) {
    const double u = (x - 0.5 * (w - 1)) / w;
    const double v = (y - 0.5 * (h - 1)) / w;
    return center / (1.0 + tilt_x * u + tilt_y * v);
  };

  DepthMap depth = make_depth(h, w);
  std::vector<int> region(static_cast<std::size_t>(h) * w, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) depth.at(y, x) = plane(y, x);
  }

  std::vector<std::array<double, 3>> albedo;
  albedo.push_back({uniform(rng, 0.5, 0.9), uniform(rng, 0.5, 0.9), uniform(rng, 0.5, 0.9)});
  const double stripe_freq = uniform(rng, 2.0, 5.0);

  // Objects sit at least 0.1*range in front of the nearest plane point, so
  // every object boundary is a depth discontinuity.
  const double near_limit = std::max(spec.min_depth + 0.02 * range, plane_min - 0.1 * range);
  for (int k = 0; k < spec.n_objects; ++k) {
    const bool sphere = uniform(rng, 0.0, 1.0) < 0.5;
    const double cx = uniform(rng, 0.15, 0.85) * (w - 1);
    const double cy = uniform(rng, 0.15, 0.85) * (h - 1);
    const double z = uniform(rng, spec.min_depth + 0.02 * range, near_limit);
    albedo.push_back({uniform(rng, 0.2, 1.0), uniform(rng, 0.2, 1.0), uniform(rng, 0.2, 1.0)});
    const int id = static_cast<int>(albedo.size()) - 1;
    if (sphere) {
      const double radius_px = uniform(rng, 1.0 / 12.0, 1.0 / 5.0) * std::min(h, w);
      const double radius_m = radius_px * z / w;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double r2 = ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (radius_px * radius_px);
          if (r2 >= 1.0) continue;
          const double d = z - radius_m * std::sqrt(1.0 - r2);
          if (d < depth.at(y, x)) {
            depth.at(y, x) = d;
            region[static_cast<std::size_t>(y) * w + x] = id;
          }
        }
      }
    } else {
      const double half_w = uniform(rng, 1.0 / 16.0, 1.0 / 6.0) * w;
      const double half_h = uniform(rng, 1.0 / 16.0, 1.0 / 6.0) * h;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (std::abs(x - cx) > half_w || std::abs(y - cy) > half_h) continue;
          if (z < depth.at(y, x)) {
            depth.at(y, x) = z;
            region[static_cast<std::size_t>(y) * w + x] = id;
          }
        }
      }
    }
  }
  for (double& d : depth.data()) d = std::clamp(d, spec.min_depth, spec.max_depth);

  // Lambertian shading with a light at the camera; brightness also falls off
  // with distance.
  const double lx = -0.3, ly = -0.5, lz = 1.0;
  const double ln = std::sqrt(lx * lx + ly * ly + lz * lz);
  FeatureMap image(3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
      const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
      const double z = depth.at(y, x);
      // depth change per unit of lateral metric distance (pixel = z / w meters)
      const double gx = (depth.at(y, xr) - depth.at(y, xl)) / std::max(xr - xl, 1) * w / z;
      const double gy = (depth.at(yd, x) - depth.at(yu, x)) / std::max(yd - yu, 1) * w / z;
      const double nn = std::sqrt(gx * gx + gy * gy + 1.0);
      const double lambert = std::max(0.0, (-gx * lx - gy * ly + lz) / (nn * ln));
      const double falloff = spec.min_depth / z;
      const int id = region[static_cast<std::size_t>(y) * w + x];
      double texture = 1.0;
      if (id == 0) {
        texture = 0.85 + 0.15 * std::sin(2.0 * M_PI * stripe_freq * x / w);
      }
      for (int c = 0; c < 3; ++c) {
        const double v = albedo[id][c] * texture * (0.3 + 0.7 * lambert) * (0.4 + 0.6 * falloff);
        image(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return {std::move(image), std::move(depth)};
}

PreprocessSpec PreprocessSpec::for_target(int height, int width) {
  return {height, width, height + height / 8, width + width / 8};
}

RgbdSample crop_to_target(const RgbdSample& sample, const PreprocessSpec& spec) {
  if (spec.target_height < 2 || spec.target_width < 2 || spec.target_height % 2 != 0 ||
      spec.target_width % 2 != 0) {
    throw ConfigError("preprocess target size must be even and positive");
  }
  if (spec.precrop_height < spec.target_height || spec.precrop_width < spec.target_width) {
    throw ConfigError("pre-crop size must be at least the target size");
  }
  if (!sample.image.same_spatial(sample.depth)) {
    throw DataError("image and depth sizes differ: " + sample.image.shape_string() +
                    " vs " + sample.depth.shape_string());
  }
  if (sample.image.height() < spec.precrop_height || sample.image.width() < spec.precrop_width) {
    throw DataError("sample " + std::to_string(sample.image.width()) + "x" +
                    std::to_string(sample.image.height()) + " is smaller than the pre-crop size " +
                    std::to_string(spec.precrop_width) + "x" + std::to_string(spec.precrop_height));
  }
  const FeatureMap image = bilinear_resize(sample.image, spec.precrop_height, spec.precrop_width);
  const DepthMap depth = resize_depth(sample.depth, spec.precrop_height, spec.precrop_width);
  const int top = (spec.precrop_height - spec.target_height) / 2;
  const int left = (spec.precrop_width - spec.target_width) / 2;
  RgbdSample out;
  out.image = crop(image, top, left, spec.target_height, spec.target_width);
  out.depth = crop(depth, top, left, spec.target_height, spec.target_width);
  return out;
}

RgbdSample preprocess(const RgbdSample& sample, const PreprocessSpec& spec) {
  RgbdSample out = crop_to_target(sample, spec);
  out.depth = avg_pool2x2(out.depth, /*skip_nonpositive=*/true);
  return out;
}

PreprocessSpec effective_spec(const RgbdSample& sample, const PreprocessSpec& spec) {
  PreprocessSpec out = spec;
  if (sample.image.height() == spec.target_height && sample.image.width() == spec.target_width) {
    out.precrop_height = spec.target_height;
    out.precrop_width = spec.target_width;
  }
  return out;
}

RgbdSample prepare_sample(const RgbdSample& sample, const PreprocessSpec& spec) {
  return preprocess(sample, effective_spec(sample, spec));
}

AugmentDraw draw_augmentation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AugmentDraw draw;
  draw.flip = uniform(rng, 0.0, 1.0) < 0.5;
  for (double& s : draw.color_scale) s = uniform(rng, 0.8, 1.2);
  return draw;
}

RgbdSample apply_augmentation(const RgbdSample& sample, const AugmentDraw& draw) {
  RgbdSample out = sample;
  if (draw.flip) {
    auto flip = [](const FeatureMap& in, FeatureMap& dst) {
      for (int c = 0; c < in.channels(); ++c) {
        for (int y = 0; y < in.height(); ++y) {
          for (int x = 0; x < in.width(); ++x) dst(c, y, x) = in(c, y, in.width() - 1 - x);
        }
      }
    };
    flip(sample.image, out.image);
    flip(sample.depth, out.depth);
  }
  for (int c = 0; c < out.image.channels(); ++c) {
    for (double& v : out.image.channel(c)) v = std::clamp(v * draw.color_scale[c], 0.0, 1.0);
  }
  return out;
}

RgbdSample augment(const RgbdSample& sample, std::uint64_t seed) {
  return apply_augmentation(sample, draw_augmentation(seed));
}

void write_sample(const RgbdSample& sample, const std::filesystem::path& base) {
  if (sample.image.channels() != 3 || sample.depth.channels() != 1) {
    throw DataError("sample must pair a 3-channel image with a 1-channel depth map");
  }
  write_raster(base.string() + ".rgb", sample.image);
  write_raster(base.string() + ".dep", sample.depth);
}

RgbdSample read_sample(const std::filesystem::path& base) {
  RgbdSample s;
  s.image = read_raster(base.string() + ".rgb");
  s.depth = read_raster(base.string() + ".dep");
  if (s.image.channels() != 3) throw DataError("image raster must have 3 channels: " + base.string());
  if (s.depth.channels() != 1) throw DataError("depth raster must have 1 channel: " + base.string());
  return s;
}

std::vector<std::string> read_index(const std::filesystem::path& split_dir) {
  const auto path = split_dir / "index.txt";
  std::ifstream in(path);
  if (!in) throw IoError("missing dataset index", path.string());
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

void write_index(const std::filesystem::path& split_dir, const std::vector<std::string>& names) {
  std::string text;
  for (const auto& n : names) text += n + "\n";
  write_file(split_dir / "index.txt", text);
}

std::vector<RgbdSample> load_split(const std::filesystem::path& root, const std::string& split) {
  const auto dir = root / split;
  if (!std::filesystem::is_directory(dir)) throw IoError("missing dataset split", dir.string());
  std::vector<RgbdSample> samples;
  for (const auto& name : read_index(dir)) samples.push_back(read_sample(dir / name));
  return samples;
}

void generate_dataset(const std::filesystem::path& root, const GenerateOptions& options) {
  if (options.count < 0) throw ConfigError("sample count must be non-negative");
  SceneSpec spec;
  spec.height = options.height;
  spec.width = options.width;
  spec.n_objects = options.n_objects;
  spec.min_depth = options.min_depth;
  spec.max_depth = options.max_depth;
  spec.validate(options.levels);
  const auto dir = root / options.split;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create dataset directory", dir.string());
  }
  const std::uint64_t split_salt = fnv1a64(options.split);
  std::vector<std::string> names;
  for (int k = 0; k < options.count; ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%05d", k);
    spec.seed = mix_seed(mix_seed(options.seed, split_salt), static_cast<std::uint64_t>(k));
    write_sample(generate_scene(spec), dir / name);
    names.emplace_back(name);
  }
  write_index(dir, names);
}

}  // namespace sarpn
