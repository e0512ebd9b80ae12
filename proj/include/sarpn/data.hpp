#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sarpn/feature_map.hpp"

namespace sarpn {

/// Procedural indoor-like scene: a tilted background plane plus boxes and
/// spheres in front of it.
struct SceneSpec {
  std::uint64_t seed = 0;
  int height = 64;
  int width = 64;
  double min_depth = 1.0;
  double max_depth = 5.0;
  int n_objects = 4;

  /// `levels` > 0 additionally requires (height, width) divisible by 2^levels.
  void validate(int levels = 0) const;
};

/// Image is 3 channels in [0, 1]; depth is meters with 0 marking holes.
struct RgbdSample {
  FeatureMap image;
  DepthMap depth;
};

RgbdSample generate_scene(const SceneSpec& spec);

struct PreprocessSpec {
  int target_height = 64;
  int target_width = 64;
  int precrop_height = 72;
  int precrop_width = 72;

  /// Pre-crop size of target + target/8, rounded down.
  static PreprocessSpec for_target(int height, int width);
};

/// Bilinear resize to the pre-crop size, center crop to the target size, and
/// 2x2 pooling of depth (over valid pixels) to half the target size. Depth is
/// resized with hole-aware bilinear weights.
RgbdSample preprocess(const RgbdSample& sample, const PreprocessSpec& spec);

/// Resize and center crop only: image and depth both at the target size.
RgbdSample crop_to_target(const RgbdSample& sample, const PreprocessSpec& spec);

/// `spec` with the pre-crop skipped for samples already at the target size.
PreprocessSpec effective_spec(const RgbdSample& sample, const PreprocessSpec& spec);

/// Brings a stored sample to network input size: samples already at the
/// target size only get their depth pooled to half resolution.
RgbdSample prepare_sample(const RgbdSample& sample, const PreprocessSpec& spec);

struct AugmentDraw {
  bool flip = false;
  std::array<double, 3> color_scale{1.0, 1.0, 1.0};
};

AugmentDraw draw_augmentation(std::uint64_t seed);
RgbdSample apply_augmentation(const RgbdSample& sample, const AugmentDraw& draw);
/// Horizontal flip with probability 0.5 (image and depth together) and
/// per-channel color scaling in [0.8, 1.2] on the image only.
RgbdSample augment(const RgbdSample& sample, std::uint64_t seed);

/// Writes `base`.rgb and `base`.dep.
void write_sample(const RgbdSample& sample, const std::filesystem::path& base);
RgbdSample read_sample(const std::filesystem::path& base);

// Dataset layout: root/{train,val}/name.{rgb,dep} with root/<split>/index.txt
// listing basenames one per line.
std::vector<std::string> read_index(const std::filesystem::path& split_dir);
void write_index(const std::filesystem::path& split_dir,
                 const std::vector<std::string>& names);
std::vector<RgbdSample> load_split(const std::filesystem::path& root,
                                   const std::string& split);

struct GenerateOptions {
  std::uint64_t seed = 0;
  int count = 1;
  int height = 64;
  int width = 64;
  int n_objects = 4;
  double min_depth = 1.0;
  double max_depth = 5.0;
  int levels = 5;
  std::string split = "train";
};

/// Writes `count` scenes into root/<split>/ plus its index.txt. Scene k uses
/// seed mix(seed, split, k).
void generate_dataset(const std::filesystem::path& root, const GenerateOptions& options);

/// SplitMix64 finaliser, used to derive independent per-item seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);
std::uint64_t fnv1a64(std::string_view text);

}  // namespace sarpn
