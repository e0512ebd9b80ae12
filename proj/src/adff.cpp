#include "sarpn/adff.hpp"

#include "sarpn/errors.hpp"

namespace sarpn {

RefineBlock::RefineBlock(ParameterStore& store, const std::string& name,
                         int channels, Rng& rng)
    : conv1_(store, name + ".conv1", {channels, channels, 3, 1, 1}, rng),
      conv2_(store, name + ".conv2", {channels, channels, 3, 1, 1}, rng) {}

Var RefineBlock::forward(Tape& tape, Var x) const {
  Var branch = tape.conv(tape.relu(tape.conv(x, conv1_)), conv2_);
  return tape.relu(tape.add(x, branch));
}

FeatureMap RefineBlock::apply(const FeatureMap& x) const {
  Tape tape;
  return tape.value(forward(tape, tape.input(x)));
}

MultiScaleFusion::MultiScaleFusion(ParameterStore& store, const std::string& name,
                                   int target_level,
                                   std::span<const int> source_channels,
                                   int fused_channels, Rng& rng)
    : target_level_(target_level) {
  const int levels = static_cast<int>(source_channels.size());
  if (target_level < 1 || target_level > levels) {
    throw ConfigError("fusion target level " + std::to_string(target_level) +
                      " outside 1.." + std::to_string(levels));
  }
  int total = 0;
  for (int k = 0; k < levels; ++k) {
    refine_.emplace_back(store, name + ".refine" + std::to_string(k + 1),
                         source_channels[k], rng);
    total += source_channels[k];
  }
  reduce_ = Conv2d(store, name + ".reduce", {total, fused_channels, 1, 1, 0}, rng);
}

Var MultiScaleFusion::forward(Tape& tape, std::span<const Var> encoder) const {
  if (encoder.size() != refine_.size()) {
    throw ConfigError("fusion unit expects " + std::to_string(refine_.size()) +
                      " encoder levels, got " + std::to_string(encoder.size()));
  }
  const FeatureMap& target = tape.value(encoder[target_level_ - 1]);
  std::vector<Var> parts;
  parts.reserve(encoder.size());
  for (std::size_t k = 0; k < encoder.size(); ++k) {
    Var resized = tape.resize(encoder[k], target.height(), target.width());
    parts.push_back(refine_[k].forward(tape, resized));
  }
  return tape.conv(tape.concat(parts), reduce_);
}

DenseFeatureFusion::DenseFeatureFusion(ParameterStore& store,
                                       std::span<const int> source_channels,
                                       int fused_channels, Rng& rng)
    : fused_channels_(fused_channels) {
  if (fused_channels < 1) throw ConfigError("fused_channels must be positive");
  const int levels = static_cast<int>(source_channels.size());
  for (int i = 1; i <= levels; ++i) {
    units_.emplace_back(store, "adff.mff" + std::to_string(i), i, source_channels,
                        fused_channels, rng);
  }
}

std::vector<Var> DenseFeatureFusion::forward(Tape& tape,
                                             std::span<const Var> encoder) const {
  std::vector<Var> fused;
  fused.reserve(units_.size());
  for (const auto& unit : units_) fused.push_back(unit.forward(tape, encoder));
  return fused;
}

std::vector<FeatureMap> DenseFeatureFusion::fuse(
    const std::vector<FeatureMap>& encoder) const {
  Tape tape;
  std::vector<Var> in;
  for (const auto& m : encoder) in.push_back(tape.input(m));
  std::vector<FeatureMap> out;
  for (Var v : forward(tape, in)) out.push_back(tape.value(v));
  return out;
}

}  // namespace sarpn
