#pragma once

// Adaptive dense feature fusion: one multi-scale fusion unit per pyramid
// level, each drawing on every encoder level.

#include <span>
#include <string>
#include <vector>

#include "sarpn/tape.hpp"

namespace sarpn {

/// ReLU(x + conv2(ReLU(conv1(x)))) with two shape-preserving 3x3 convs.
class RefineBlock {
 public:
  RefineBlock() = default;
  RefineBlock(ParameterStore& store, const std::string& name, int channels,
              Rng& rng);

  Var forward(Tape& tape, Var x) const;
  FeatureMap apply(const FeatureMap& x) const;

  const Conv2d& conv1() const noexcept { return conv1_; }
  const Conv2d& conv2() const noexcept { return conv2_; }

 private:
  Conv2d conv1_;
  Conv2d conv2_;
};

/// Fuses all encoder levels at one target level: bilinear resize of every
/// source map to the target resolution, a dedicated refine block per source,
/// channel concatenation, then a 1x1 reduction to `fused_channels`.
class MultiScaleFusion {
 public:
  MultiScaleFusion() = default;
  MultiScaleFusion(ParameterStore& store, const std::string& name,
                   int target_level, std::span<const int> source_channels,
                   int fused_channels, Rng& rng);

  /// `encoder[k]` is level k+1. Output is at the target level's resolution,
  /// which is taken from encoder[target_level-1].
  Var forward(Tape& tape, std::span<const Var> encoder) const;

  int target_level() const noexcept { return target_level_; }
  const std::vector<RefineBlock>& refine_blocks() const noexcept { return refine_; }
  const Conv2d& reduce() const noexcept { return reduce_; }

 private:
  int target_level_ = 1;
  std::vector<RefineBlock> refine_;
  Conv2d reduce_;
};

/// L independent fusion units; output level i is fusion unit i applied to
/// the whole encoder pyramid.
class DenseFeatureFusion {
 public:
  DenseFeatureFusion() = default;
  DenseFeatureFusion(ParameterStore& store, std::span<const int> source_channels,
                     int fused_channels, Rng& rng);

  std::vector<Var> forward(Tape& tape, std::span<const Var> encoder) const;
  std::vector<FeatureMap> fuse(const std::vector<FeatureMap>& encoder) const;

  int fused_channels() const noexcept { return fused_channels_; }
  const std::vector<MultiScaleFusion>& units() const noexcept { return units_; }

 private:
  int fused_channels_ = 0;
  std::vector<MultiScaleFusion> units_;
};

}  // namespace sarpn
