#pragma once

// Numeric building blocks: convolution, bilinear resizing, pooling,
// activations and channel concatenation. Every forward kernel has a matching
// backward kernel that accumulates vector-Jacobian products into caller-owned
// buffers, so the tape in tape.hpp can chain them.

#include <span>
#include <utility>
#include <vector>

#include "sarpn/feature_map.hpp"

namespace sarpn {

struct ConvSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_size = 3;
  int stride = 1;
  int padding = 1;

  /// Throws ConfigError for non-positive channels, even/non-positive kernels,
  /// non-positive stride or negative padding.
  void validate() const;
  /// floor((in + 2*padding - kernel)/stride) + 1 per axis; throws ConfigError
  /// if either axis would be < 1.
  LevelSize output_size(int height, int width) const;
  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel_size *
           kernel_size;
  }
};

/// Cross-correlation with zero padding. Weights are laid out
/// [out][in][ky][kx]; bias has one entry per output channel.
FeatureMap conv2d(const FeatureMap& input, const ConvSpec& spec,
                  std::span<const double> weights,
                  std::span<const double> bias);

/// Accumulates d(loss)/d(input), d/d(weights), d/d(bias) given
/// d(loss)/d(output). `grad_input` may be null when the input gradient is not
/// needed.
void conv2d_backward(const FeatureMap& input, const ConvSpec& spec,
                     std::span<const double> weights,
                     const FeatureMap& grad_output, FeatureMap* grad_input,
                     std::span<double> grad_weights,
                     std::span<double> grad_bias);

/// Corner-aligned bilinear resampling: source coordinate is
/// out_index * (in_size - 1) / (out_size - 1), and index 0 when out_size == 1.
FeatureMap bilinear_resize(const FeatureMap& input, int out_height,
                           int out_width);
void bilinear_resize_backward(const FeatureMap& grad_output,
                              FeatureMap& grad_input);

std::vector<double> global_avg_pool(const FeatureMap& input);
void global_avg_pool_backward(std::span<const double> grad_output,
                              FeatureMap& grad_input);

FeatureMap concat_channels(std::span<const FeatureMap* const> inputs);
FeatureMap concat_channels(const std::vector<FeatureMap>& inputs);
FeatureMap slice_channels(const FeatureMap& input, int first, int count);

FeatureMap relu(const FeatureMap& input);
void relu_backward(const FeatureMap& input, const FeatureMap& grad_output,
                   FeatureMap& grad_input);

double sigmoid(double x) noexcept;
FeatureMap sigmoid(const FeatureMap& input);

/// output[c](y, x) = input[c](y, x) * gate[c].
FeatureMap scale_channels(const FeatureMap& input, std::span<const double> gate);

/// Mean of each non-overlapping 2x2 block. With `skip_nonpositive`, blocks
/// average only their positive entries and are 0 when none are positive.
FeatureMap avg_pool2x2(const FeatureMap& input, bool skip_nonpositive = false);

}  // namespace sarpn
