#include "sarpn/encoder.hpp"

#include "sarpn/errors.hpp"

namespace sarpn {

void EncoderConfig::validate() const {
  if (levels < 1) throw ConfigError("levels must be positive");
  if (static_cast<int>(stage_channels.size()) != levels) {
    throw ConfigError("stage_channels must list " + std::to_string(levels) +
                      " widths, got " + std::to_string(stage_channels.size()));
  }
  if (se_reduction < 1) throw ConfigError("se_reduction must be positive");
  if (height < 1 || width < 1) throw ConfigError("input size must be positive");
  const int scale = 1 << levels;
  if (height % scale != 0 || width % scale != 0) {
    throw ConfigError("input size " + std::to_string(height) + "x" +
                      std::to_string(width) + " is not divisible by 2^" +
                      std::to_string(levels) + " = " + std::to_string(scale));
  }
  for (int c : stage_channels) {
    if (c < 1 || c % se_reduction != 0) {
      throw ConfigError("stage width " + std::to_string(c) +
                        " is not a positive multiple of se_reduction " +
                        std::to_string(se_reduction));
    }
  }
}

SeBlock::SeBlock(ParameterStore& store, const std::string& name, int channels,
                 int reduction, Rng& rng) {
  if (reduction < 1 || channels % reduction != 0) {
    throw ConfigError("squeeze-excitation: " + std::to_string(channels) +
                      " channels not divisible by reduction " +
                      std::to_string(reduction));
  }
  const int hidden = channels / reduction;
  squeeze_ = Conv2d(store, name + ".squeeze", {channels, hidden, 1, 1, 0}, rng);
  // Near-zero excitation keeps initial gates close to sigmoid(0) = 0.5.
  excite_ = Conv2d(store, name + ".excite", {hidden, channels, 1, 1, 0}, rng,
                   InitKind::small);
}

Var SeBlock::forward(Tape& tape, Var x) const {
  Var pooled = tape.global_avg_pool(x);
  Var hidden = tape.relu(tape.conv(pooled, squeeze_));
  Var gate = tape.sigmoid(tape.conv(hidden, excite_));
  return tape.scale_channels(x, gate);
}

FeatureMap SeBlock::apply(const FeatureMap& x) const {
  Tape tape;
  return tape.value(forward(tape, tape.input(x)));
}

std::vector<double> SeBlock::gate(const FeatureMap& x) const {
  Tape tape;
  Var pooled = tape.global_avg_pool(tape.input(x));
  Var g = tape.sigmoid(tape.conv(tape.relu(tape.conv(pooled, squeeze_)), excite_));
  const auto v = tape.value(g).data();
  return {v.begin(), v.end()};
}

EncoderStage::EncoderStage(ParameterStore& store, const std::string& name,
                           int in_channels, int out_channels, int reduction,
                           Rng& rng) {
  down_ = Conv2d(store, name + ".down", {in_channels, out_channels, 3, 2, 1}, rng);
  conv_ = Conv2d(store, name + ".conv", {out_channels, out_channels, 3, 1, 1}, rng);
  se_ = SeBlock(store, name + ".se", out_channels, reduction, rng);
}

Var EncoderStage::forward(Tape& tape, Var x) const {
  Var h = tape.relu(tape.conv(x, down_));
  h = tape.relu(tape.conv(h, conv_));
  return se_.forward(tape, h);
}

Encoder::Encoder(ParameterStore& store, const EncoderConfig& config, Rng& rng)
    : config_(config) {
  config.validate();
  int in = 3;
  for (int i = 0; i < config.levels; ++i) {
    stages_.emplace_back(store, "encoder.stage" + std::to_string(i + 1), in,
                         config.stage_channels[i], config.se_reduction, rng);
    in = config.stage_channels[i];
  }
}

std::vector<Var> Encoder::forward(Tape& tape, Var image) const {
  const FeatureMap& img = tape.value(image);
  if (img.channels() != 3) throw ConfigError("encoder expects a 3-channel image");
  if (img.height() != config_.height || img.width() != config_.width) {
    throw ConfigError("encoder expects a " + std::to_string(config_.height) + "x" +
                      std::to_string(config_.width) + " image, got " +
                      std::to_string(img.height()) + "x" + std::to_string(img.width()));
  }
  std::vector<Var> maps;
  Var x = image;
  for (const auto& stage : stages_) {
    x = stage.forward(tape, x);
    maps.push_back(x);
  }
  return maps;
}

std::vector<FeatureMap> Encoder::encode(const FeatureMap& image) const {
  Tape tape;
  std::vector<FeatureMap> out;
  for (Var v : forward(tape, tape.input(image))) out.push_back(tape.value(v));
  return out;
}

}  // namespace sarpn
