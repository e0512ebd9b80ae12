#include "sarpn/rpd.hpp"

#include "sarpn/errors.hpp"

namespace sarpn {

TopDepthPredictor::TopDepthPredictor(ParameterStore& store, int encoder_channels,
                                     int feature_channels, double initial_depth,
                                     Rng& rng)
    : reduce_(store, "rpd.top.reduce", {encoder_channels, feature_channels, 1, 1, 0}, rng),
      refine_(store, "rpd.top.refine", 2 * feature_channels, rng),
      head_(store, "rpd.top.head", {2 * feature_channels, 1, 3, 1, 1}, rng,
            InitKind::small, initial_depth) {}

Var TopDepthPredictor::forward(Tape& tape, Var encoder_top, Var feature_top) const {
  if (!tape.value(encoder_top).same_spatial(tape.value(feature_top))) {
    throw ConfigError("top predictor inputs differ in size: " +
                      tape.value(encoder_top).shape_string() + " vs " +
                      tape.value(feature_top).shape_string());
  }
  const Var parts[2] = {tape.conv(encoder_top, reduce_), feature_top};
  return tape.conv(refine_.forward(tape, tape.concat(parts)), head_);
}

ResidualRefinementModule::ResidualRefinementModule(ParameterStore& store,
                                                   const std::string& name,
                                                   int feature_channels,
                                                   int head_hidden,
                                                   int refine_hidden, Rng& rng)
    : res1_(store, name + ".residual1", {feature_channels, head_hidden, 3, 1, 1}, rng),
      res2_(store, name + ".residual2", {head_hidden, 1, 3, 1, 1}, rng, InitKind::small),
      ref1_(store, name + ".refine1", {1, refine_hidden, 3, 1, 1}, rng),
      ref2_(store, name + ".refine2", {refine_hidden, refine_hidden, 3, 1, 1}, rng),
      ref3_(store, name + ".refine3", {refine_hidden, 1, 3, 1, 1}, rng, InitKind::small) {}

Var ResidualRefinementModule::refine(Tape& tape, Var sum) const {
  Var h = tape.relu(tape.conv(sum, ref1_));
  h = tape.relu(tape.conv(h, ref2_));
  return tape.add(sum, tape.conv(h, ref3_));
}

DepthMap ResidualRefinementModule::apply_refine(const DepthMap& sum) const {
  Tape tape;
  return tape.value(refine(tape, tape.input(sum)));
}

ResidualRefinementModule::Output ResidualRefinementModule::forward(
    Tape& tape, Var coarser, Var features) const {
  const FeatureMap& c = tape.value(coarser);
  const FeatureMap& f = tape.value(features);
  if (c.channels() != 1) throw ConfigError("coarser depth must be single-channel");
  if (2 * c.height() != f.height() || 2 * c.width() != f.width()) {
    throw ConfigError("refinement level size mismatch: coarser " + c.shape_string() +
                      ", features " + f.shape_string());
  }
  Output out;
  out.upsampled = tape.resize(coarser, f.height(), f.width());
  out.residual = tape.conv(tape.relu(tape.conv(features, res1_)), res2_);
  out.sum = tape.add(out.upsampled, out.residual);
  out.depth = refine(tape, out.sum);
  return out;
}

void ResidualRefinementModule::zero() const {
  for (const Conv2d* c : {&res1_, &res2_, &ref1_, &ref2_, &ref3_}) zero_parameters(*c);
}

ResidualPyramidDecoder::ResidualPyramidDecoder(ParameterStore& store,
                                               std::span<const int> encoder_channels,
                                               std::span<const int> feature_channels,
                                               int head_hidden, int refine_hidden,
                                               double initial_depth, Rng& rng) {
  const int levels = static_cast<int>(encoder_channels.size());
  if (levels < 1 || feature_channels.size() != encoder_channels.size()) {
    throw ConfigError("decoder needs matching encoder and feature level counts");
  }
  top_ = TopDepthPredictor(store, encoder_channels.back(), feature_channels.back(),
                           initial_depth, rng);
  for (int k = 0; k + 1 < levels; ++k) {
    rrm_.emplace_back(store, "rpd.rrm" + std::to_string(k + 1), feature_channels[k],
                      head_hidden, refine_hidden, rng);
  }
}

DecoderOutput ResidualPyramidDecoder::forward(Tape& tape,
                                              std::span<const Var> encoder,
                                              std::span<const Var> features) const {
  const int levels = this->levels();
  if (static_cast<int>(encoder.size()) != levels ||
      static_cast<int>(features.size()) != levels) {
    throw ConfigError("decoder expects " + std::to_string(levels) + " levels");
  }
  DecoderOutput out;
  out.depths.resize(levels);
  out.residuals.resize(levels - 1);
  out.depths[levels - 1] = top_.forward(tape, encoder.back(), features.back());
  for (int k = levels - 2; k >= 0; --k) {
    const auto step = rrm_[k].forward(tape, out.depths[k + 1], features[k]);
    out.depths[k] = step.depth;
    out.residuals[k] = step.residual;
  }
  return out;
}

}  // namespace sarpn
