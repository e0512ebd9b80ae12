#pragma once

#include <string>
#include <vector>

#include "sarpn/tape.hpp"

namespace sarpn {

struct EncoderConfig {
  int levels = 5;
  std::vector<int> stage_channels{16, 32, 64, 128, 256};
  int se_reduction = 4;
  int height = 64;
  int width = 64;

  /// Checks stage count, divisibility of (height, width) by 2^levels and of
  /// every stage width by se_reduction.
  void validate() const;
};

/// Squeeze-excitation channel gate: global mean -> FC(c, c/r) -> ReLU ->
/// FC(c/r, c) -> sigmoid -> per-channel scaling. The FC layers are 1x1
/// convolutions on a (c x 1 x 1) map.
class SeBlock {
 public:
  SeBlock() = default;
  SeBlock(ParameterStore& store, const std::string& name, int channels,
          int reduction, Rng& rng);

  Var forward(Tape& tape, Var x) const;
  FeatureMap apply(const FeatureMap& x) const;
  /// Gate values for `x` (one per channel), without scaling.
  std::vector<double> gate(const FeatureMap& x) const;

  const Conv2d& squeeze() const noexcept { return squeeze_; }
  const Conv2d& excite() const noexcept { return excite_; }

 private:
  Conv2d squeeze_;
  Conv2d excite_;
};

/// Strided conv + ReLU + conv + ReLU + squeeze-excitation, halving resolution.
class EncoderStage {
 public:
  EncoderStage() = default;
  EncoderStage(ParameterStore& store, const std::string& name, int in_channels,
               int out_channels, int reduction, Rng& rng);
  Var forward(Tape& tape, Var x) const;

  const Conv2d& down() const noexcept { return down_; }
  const Conv2d& conv() const noexcept { return conv_; }
  const SeBlock& se() const noexcept { return se_; }

 private:
  Conv2d down_;
  Conv2d conv_;
  SeBlock se_;
};

/// Produces the L-level encoder pyramid; level i (1-based) has size
/// (H/2^i, W/2^i) and stage_channels[i-1] channels.
class Encoder {
 public:
  Encoder() = default;
  Encoder(ParameterStore& store, const EncoderConfig& config, Rng& rng);

  std::vector<Var> forward(Tape& tape, Var image) const;
  std::vector<FeatureMap> encode(const FeatureMap& image) const;

  const EncoderConfig& config() const noexcept { return config_; }
  const std::vector<EncoderStage>& stages() const noexcept { return stages_; }

 private:
  EncoderConfig config_;
  std::vector<EncoderStage> stages_;
};

}  // namespace sarpn
