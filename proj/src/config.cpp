#include "sarpn/config.hpp"

#include <charconv>
#include <cstdio>

#include "sarpn/errors.hpp"
#include "sarpn/raster_io.hpp"

namespace sarpn {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const std::string item = trim(std::string_view(v).substr(
        start, comma == std::string::npos ? std::string::npos : comma - start));
    out.push_back(static_cast<int>(parse_int(key, item)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lr_init > 0.0)) throw ConfigError("lr_init must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw ConfigError("lr_decay_factor must lie in (0, 1]");
  }
  if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
}

void RunConfig::validate() const {
  model.validate();
  loss.validate();
  train.validate();
  if (preprocess.target_height != model.encoder.height ||
      preprocess.target_width != model.encoder.width) {
    throw ConfigError("preprocess target must equal the network input size");
  }
  if (preprocess.precrop_height < preprocess.target_height ||
      preprocess.precrop_width < preprocess.target_width) {
    throw ConfigError("pre-crop size must be at least the network input size");
  }
}

KeyValues KeyValues::parse(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    kv.set(key, value);
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

void KeyValues::set(const std::string& key, const std::string& value) { values_[key] = value; }

const std::string& KeyValues::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

std::string KeyValues::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

RunConfig run_config_from(const KeyValues& kv, RunConfig c) {
  bool precrop_given = false;
  bool size_given = false;
  for (const auto& [key, v] : kv.entries()) {
    if (key == "levels") c.model.encoder.levels = static_cast<int>(parse_int(key, v));
    else if (key == "stage_channels") c.model.encoder.stage_channels = parse_int_list(key, v);
    else if (key == "se_reduction") c.model.encoder.se_reduction = static_cast<int>(parse_int(key, v));
    else if (key == "height") { c.model.encoder.height = static_cast<int>(parse_int(key, v)); size_given = true; }
    else if (key == "width") { c.model.encoder.width = static_cast<int>(parse_int(key, v)); size_given = true; }
    else if (key == "fused_channels") c.model.fused_channels = static_cast<int>(parse_int(key, v));
    else if (key == "refine_hidden") c.model.refine_hidden = static_cast<int>(parse_int(key, v));
    else if (key == "initial_depth") c.model.initial_depth = parse_double(key, v);
    else if (key == "ablation") c.model.ablation = parse_ablation(v);
    else if (key == "init_seed") c.model.init_seed = parse_u64(key, v);
    else if (key == "alpha") c.loss.alpha = parse_double(key, v);
    else if (key == "epsilon_depth") c.loss.epsilon_depth = parse_double(key, v);
    else if (key == "lr_init") c.train.lr_init = parse_double(key, v);
    else if (key == "lr_decay_factor") c.train.lr_decay_factor = parse_double(key, v);
    else if (key == "lr_decay_every") c.train.lr_decay_every = static_cast<int>(parse_int(key, v));
    else if (key == "beta1") c.train.beta1 = parse_double(key, v);
    else if (key == "beta2") c.train.beta2 = parse_double(key, v);
    else if (key == "adam_epsilon") c.train.adam_epsilon = parse_double(key, v);
    else if (key == "weight_decay") c.train.weight_decay = parse_double(key, v);
    else if (key == "batch_size") c.train.batch_size = static_cast<int>(parse_int(key, v));
    else if (key == "epochs") c.train.epochs = static_cast<int>(parse_int(key, v));
    else if (key == "seed") c.train.seed = parse_u64(key, v);
    else if (key == "augment") c.train.augment = parse_bool(key, v);
    else if (key == "max_steps") c.train.max_steps = parse_int(key, v);
    else if (key == "precrop_height") { c.preprocess.precrop_height = static_cast<int>(parse_int(key, v)); precrop_given = true; }
    else if (key == "precrop_width") { c.preprocess.precrop_width = static_cast<int>(parse_int(key, v)); precrop_given = true; }
    else throw ConfigError("unknown config key '" + key + "'");
  }
  if (size_given) {
    const PreprocessSpec fresh =
        PreprocessSpec::for_target(c.model.encoder.height, c.model.encoder.width);
    c.preprocess.target_height = fresh.target_height;
    c.preprocess.target_width = fresh.target_width;
    if (!precrop_given) {
      c.preprocess.precrop_height = fresh.precrop_height;
      c.preprocess.precrop_width = fresh.precrop_width;
    }
  }
  return c;
}

KeyValues to_key_values(const RunConfig& c) {
  KeyValues kv;
  std::string widths;
  for (std::size_t i = 0; i < c.model.encoder.stage_channels.size(); ++i) {
    if (i > 0) widths += ",";
    widths += std::to_string(c.model.encoder.stage_channels[i]);
  }
  kv.set("levels", std::to_string(c.model.encoder.levels));
  kv.set("stage_channels", widths);
  kv.set("se_reduction", std::to_string(c.model.encoder.se_reduction));
  kv.set("height", std::to_string(c.model.encoder.height));
  kv.set("width", std::to_string(c.model.encoder.width));
  kv.set("fused_channels", std::to_string(c.model.fused_channels));
  kv.set("refine_hidden", std::to_string(c.model.refine_hidden));
  kv.set("initial_depth", fmt(c.model.initial_depth));
  kv.set("ablation", std::string(ablation_name(c.model.ablation)));
  kv.set("init_seed", std::to_string(c.model.init_seed));
  kv.set("alpha", fmt(c.loss.alpha));
  kv.set("epsilon_depth", fmt(c.loss.epsilon_depth));
  kv.set("lr_init", fmt(c.train.lr_init));
  kv.set("lr_decay_factor", fmt(c.train.lr_decay_factor));
  kv.set("lr_decay_every", std::to_string(c.train.lr_decay_every));
  kv.set("beta1", fmt(c.train.beta1));
  kv.set("beta2", fmt(c.train.beta2));
  kv.set("adam_epsilon", fmt(c.train.adam_epsilon));
  kv.set("weight_decay", fmt(c.train.weight_decay));
  kv.set("batch_size", std::to_string(c.train.batch_size));
  kv.set("epochs", std::to_string(c.train.epochs));
  kv.set("seed", std::to_string(c.train.seed));
  kv.set("augment", c.train.augment ? "true" : "false");
  kv.set("max_steps", std::to_string(c.train.max_steps));
  kv.set("precrop_height", std::to_string(c.preprocess.precrop_height));
  kv.set("precrop_width", std::to_string(c.preprocess.precrop_width));
  return kv;
}

std::uint64_t config_digest(const RunConfig& config) {
  return fnv1a64(to_key_values(config).to_text());
}

RunConfig desk_config() {
  RunConfig c;
  c.model.encoder.stage_channels = {16, 16, 24, 32, 32};
  c.model.encoder.se_reduction = 4;
  c.model.fused_channels = 32;
  c.model.refine_hidden = 8;
  return c;
}

}  // namespace sarpn
