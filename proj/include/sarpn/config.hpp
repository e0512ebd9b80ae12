#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sarpn/data.hpp"
#include "sarpn/loss.hpp"
#include "sarpn/model.hpp"

namespace sarpn {

struct TrainConfig {
  double lr_init = 1e-4;
  double lr_decay_factor = 0.1;
  int lr_decay_every = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 1e-4;
  int batch_size = 4;
  int epochs = 20;
  std::uint64_t seed = 0;
  bool augment = true;
  std::int64_t max_steps = 0;  // 0: no cap

  void validate() const;
};

/// Everything needed to rebuild and train a model.
struct RunConfig {
  ModelConfig model;
  LossConfig loss;
  TrainConfig train;
  PreprocessSpec preprocess = PreprocessSpec::for_target(64, 64);

  void validate() const;
};

/// Ordered `key = value` pairs. Text form: one pair per line, `#` starts a
/// comment, blank lines ignored.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text);
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  bool contains(const std::string& key) const { return values_.count(key) > 0; }
  const std::string& get(const std::string& key) const;
  const std::map<std::string, std::string>& entries() const noexcept { return values_; }
  /// Lines in key order, `key = value\n` each.
  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Applies recognised keys on top of defaults. Unknown keys and malformed
/// values are ConfigErrors. Setting `height`/`width` also resets the
/// preprocess target (and pre-crop, unless given).
RunConfig run_config_from(const KeyValues& kv, RunConfig base = {});
/// All keys with every default materialised, floats printed round-trip exact.
KeyValues to_key_values(const RunConfig& config);
std::uint64_t config_digest(const RunConfig& config);

/// Named ablation presets used by the tests and the CLI: `desk` is the
/// compact configuration used for CPU training runs.
RunConfig desk_config();

}  // namespace sarpn
