#pragma once

// Residual pyramid decoder. The coarsest depth map is predicted from the top
// encoder and feature maps; every finer level upsamples the coarser depth,
// adds a residual predicted from that level's features and refines the sum.

#include <span>
#include <string>
#include <vector>

#include "sarpn/adff.hpp"
#include "sarpn/tape.hpp"

namespace sarpn {

/// Coarsest-level depth head: 1x1 reduce of the encoder top map to the
/// feature width, concat with the feature top map, refine block, 3x3 head.
class TopDepthPredictor {
 public:
  TopDepthPredictor() = default;
  TopDepthPredictor(ParameterStore& store, int encoder_channels,
                    int feature_channels, double initial_depth, Rng& rng);

  Var forward(Tape& tape, Var encoder_top, Var feature_top) const;

  const Conv2d& reduce() const noexcept { return reduce_; }
  const RefineBlock& refine() const noexcept { return refine_; }
  const Conv2d& head() const noexcept { return head_; }

 private:
  Conv2d reduce_;
  RefineBlock refine_;
  Conv2d head_;
};

/// One refinement level. The refine chain is three 3x3 convs
/// (1 -> hidden -> hidden -> 1) with an identity skip from its input.
class ResidualRefinementModule {
 public:
  struct Output {
    Var depth;
    Var residual;
    Var upsampled;
    Var sum;
  };

  ResidualRefinementModule() = default;
  ResidualRefinementModule(ParameterStore& store, const std::string& name,
                           int feature_channels, int head_hidden,
                           int refine_hidden, Rng& rng);

  Output forward(Tape& tape, Var coarser, Var features) const;
  /// Refine chain alone: sum + conv3(ReLU(conv2(ReLU(conv1(sum))))).
  Var refine(Tape& tape, Var sum) const;
  DepthMap apply_refine(const DepthMap& sum) const;

  const Conv2d& residual_conv1() const noexcept { return res1_; }
  const Conv2d& residual_conv2() const noexcept { return res2_; }
  const Conv2d& refine_conv1() const noexcept { return ref1_; }
  const Conv2d& refine_conv2() const noexcept { return ref2_; }
  const Conv2d& refine_conv3() const noexcept { return ref3_; }
  /// Sets every conv of this level (residual head and refine chain) to zero.
  void zero() const;

 private:
  Conv2d res1_;
  Conv2d res2_;
  Conv2d ref1_;
  Conv2d ref2_;
  Conv2d ref3_;
};

struct DecoderOutput {
  std::vector<Var> depths;     // depths[k] is level k+1
  std::vector<Var> residuals;  // residuals[k] is level k+1, k < L-1
};

class ResidualPyramidDecoder {
 public:
  ResidualPyramidDecoder() = default;
  /// `feature_channels[k]` is the width of the maps fed to level k+1 (the
  /// fused width for the full model, encoder widths without fusion).
  ResidualPyramidDecoder(ParameterStore& store, std::span<const int> encoder_channels,
                         std::span<const int> feature_channels, int head_hidden,
                         int refine_hidden, double initial_depth, Rng& rng);

  DecoderOutput forward(Tape& tape, std::span<const Var> encoder,
                        std::span<const Var> features) const;

  const TopDepthPredictor& top() const noexcept { return top_; }
  /// rrm(k) refines level k+1, for k in [0, L-2].
  const ResidualRefinementModule& rrm(int k) const { return rrm_.at(k); }
  int levels() const noexcept { return static_cast<int>(rrm_.size()) + 1; }

 private:
  TopDepthPredictor top_;
  std::vector<ResidualRefinementModule> rrm_;
};

}  // namespace sarpn
