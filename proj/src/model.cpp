#include "sarpn/model.hpp"

#include "sarpn/errors.hpp"

namespace sarpn {

Ablation parse_ablation(std::string_view name) {
  if (name == "baseline") return Ablation::baseline;
  if (name == "baseline_rpd") return Ablation::baseline_rpd;
  if (name == "full") return Ablation::full;
  throw ConfigError("unknown ablation '" + std::string(name) +
                    "'; valid names: baseline, baseline_rpd, full");
}

std::string_view ablation_name(Ablation a) noexcept {
  switch (a) {
    case Ablation::baseline:
      return "baseline";
    case Ablation::baseline_rpd:
      return "baseline_rpd";
    case Ablation::full:
      return "full";
  }
  return "full";
}

void ModelConfig::validate() const {
  encoder.validate();
  if (fused_channels < 1) throw ConfigError("fused_channels must be positive");
  if (refine_hidden < 1) throw ConfigError("refine_hidden must be positive");
}

SequentialDecoder::SequentialDecoder(ParameterStore& store,
                                     std::span<const int> encoder_channels,
                                     double initial_depth, Rng& rng) {
  const int levels = static_cast<int>(encoder_channels.size());
  for (int k = 0; k + 1 < levels; ++k) {
    const std::string name = "baseline.level" + std::to_string(k + 1);
    const int in = encoder_channels[k + 1] + encoder_channels[k];
    reduce_.emplace_back(store, name + ".reduce",
                         ConvSpec{in, encoder_channels[k], 1, 1, 0}, rng);
    refine_.emplace_back(store, name + ".refine", encoder_channels[k], rng);
  }
  head_ = Conv2d(store, "baseline.head", {encoder_channels[0], 1, 3, 1, 1}, rng,
                 InitKind::small, initial_depth);
}

Var SequentialDecoder::forward(Tape& tape, std::span<const Var> encoder) const {
  const int levels = static_cast<int>(encoder.size());
  Var x = encoder.back();
  for (int k = levels - 2; k >= 0; --k) {
    const FeatureMap& skip = tape.value(encoder[k]);
    const Var parts[2] = {tape.resize(x, skip.height(), skip.width()), encoder[k]};
    x = refine_[k].forward(tape, tape.conv(tape.concat(parts), reduce_[k]));
  }
  return tape.conv(x, head_);
}

DepthNetwork::DepthNetwork(const ModelConfig& config) : config_(config) {
  config.validate();
  Rng rng(config.init_seed);
  encoder_ = Encoder(params_, config.encoder, rng);
  const auto& widths = config.encoder.stage_channels;
  switch (config.ablation) {
    case Ablation::baseline:
      sequential_ = SequentialDecoder(params_, widths, config.initial_depth, rng);
      break;
    case Ablation::baseline_rpd:
      rpd_ = ResidualPyramidDecoder(params_, widths, widths, config.fused_channels,
                                    config.refine_hidden, config.initial_depth, rng);
      break;
    case Ablation::full: {
      fusion_ = DenseFeatureFusion(params_, widths, config.fused_channels, rng);
      const std::vector<int> fused(widths.size(), config.fused_channels);
      rpd_ = ResidualPyramidDecoder(params_, widths, fused, config.fused_channels,
                                    config.refine_hidden, config.initial_depth, rng);
      break;
    }
  }
}

DepthNetwork::Trace DepthNetwork::forward(Tape& tape, Var image) const {
  Trace trace;
  trace.encoder = encoder_.forward(tape, image);
  switch (config_.ablation) {
    case Ablation::baseline:
      trace.depths = {sequential_.forward(tape, trace.encoder)};
      return trace;
    case Ablation::baseline_rpd:
      trace.features = trace.encoder;
      break;
    case Ablation::full:
      trace.features = fusion_.forward(tape, trace.encoder);
      break;
  }
  auto decoded = rpd_.forward(tape, trace.encoder, trace.features);
  trace.depths = std::move(decoded.depths);
  trace.residuals = std::move(decoded.residuals);
  return trace;
}

DepthPyramid DepthNetwork::predict(const FeatureMap& image) const {
  Tape tape;
  const Trace trace = forward(tape, tape.input(image));
  DepthPyramid out;
  for (Var v : trace.depths) out.depths.push_back(tape.value(v));
  for (Var v : trace.residuals) out.residuals.push_back(tape.value(v));
  return out;
}

}  // namespace sarpn
