#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sarpn/adff.hpp"
#include "sarpn/encoder.hpp"
#include "sarpn/rpd.hpp"
#include "sarpn/tape.hpp"

namespace sarpn {

/// Decoder wiring of the three ablation rows.
enum class Ablation {
  baseline,      // sequential upsampling decoder with encoder skips
  baseline_rpd,  // residual pyramid decoder fed with encoder maps
  full,          // residual pyramid decoder fed with the fused pyramid
};

/// Throws ConfigError listing the valid names.
Ablation parse_ablation(std::string_view name);
std::string_view ablation_name(Ablation a) noexcept;

struct ModelConfig {
  EncoderConfig encoder;
  int fused_channels = 64;
  int refine_hidden = 8;
  double initial_depth = 3.0;
  Ablation ablation = Ablation::full;
  std::uint64_t init_seed = 1;

  void validate() const;
};

/// Baseline decoder: per level, upsample x2, concat the encoder skip, 1x1
/// reduce to the skip width, refine block; a 3x3 head emits the finest depth.
class SequentialDecoder {
 public:
  SequentialDecoder() = default;
  SequentialDecoder(ParameterStore& store, std::span<const int> encoder_channels,
                    double initial_depth, Rng& rng);

  Var forward(Tape& tape, std::span<const Var> encoder) const;

 private:
  std::vector<Conv2d> reduce_;       // reduce_[k] acts at level k+1
  std::vector<RefineBlock> refine_;
  Conv2d head_;
};

/// Network outputs for one image, finest level first.
struct DepthPyramid {
  std::vector<DepthMap> depths;
  std::vector<DepthMap> residuals;
};

class DepthNetwork {
 public:
  struct Trace {
    std::vector<Var> encoder;
    std::vector<Var> features;  // fused maps (full) or encoder maps (baseline_rpd)
    std::vector<Var> depths;
    std::vector<Var> residuals;
  };

  explicit DepthNetwork(const ModelConfig& config);

  DepthNetwork(const DepthNetwork&) = delete;
  DepthNetwork& operator=(const DepthNetwork&) = delete;
  DepthNetwork(DepthNetwork&&) = default;
  DepthNetwork& operator=(DepthNetwork&&) = default;

  Trace forward(Tape& tape, Var image) const;
  DepthPyramid predict(const FeatureMap& image) const;

  const ModelConfig& config() const noexcept { return config_; }
  ParameterStore& parameters() noexcept { return params_; }
  const ParameterStore& parameters() const noexcept { return params_; }

  bool has_fusion() const noexcept { return config_.ablation == Ablation::full; }
  bool has_residual_pyramid() const noexcept {
    return config_.ablation != Ablation::baseline;
  }
  /// Number of depth levels the network predicts (1 for the baseline).
  int output_levels() const noexcept {
    return has_residual_pyramid() ? config_.encoder.levels : 1;
  }

  const Encoder& encoder() const noexcept { return encoder_; }
  const DenseFeatureFusion& fusion() const noexcept { return fusion_; }
  const ResidualPyramidDecoder& decoder() const noexcept { return rpd_; }

 private:
  ModelConfig config_;
  ParameterStore params_;
  Encoder encoder_;
  DenseFeatureFusion fusion_;
  ResidualPyramidDecoder rpd_;
  SequentialDecoder sequential_;
};

}  // namespace sarpn
