#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sarpn/config.hpp"
#include "sarpn/data.hpp"
#include "sarpn/loss.hpp"
#include "sarpn/metrics.hpp"
#include "sarpn/model.hpp"

namespace sarpn {

/// lr_init * lr_decay_factor^floor(epoch / lr_decay_every), epoch 0-based.
double learning_rate(const TrainConfig& config, int epoch);

/// One decoupled-decay Adam update of a single tensor at 1-based step `t`:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v, std::int64_t t, double lr,
                 const TrainConfig& config);

/// Per-sample loss plus gradients accumulated into the model's parameter
/// store (without zeroing it first).
LossBreakdown accumulate_gradients(const DepthNetwork& model, const RgbdSample& sample,
                                   const LossConfig& loss);

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double total = 0.0;
  double depth = 0.0;
  double grad = 0.0;
  double normal = 0.0;
};

/// CSV with header `epoch,lr,total_loss,l_depth,l_grad,l_normal`.
std::string format_epoch_csv(const std::vector<EpochLog>& log);
/// Inverse of format_epoch_csv; malformed text is a FormatError.
std::vector<EpochLog> parse_epoch_csv(std::string_view text);

/// Model, optimizer state and progress counters of one training run.
/// Parameters and Adam moments are kept float32-representable after every
/// update so checkpoints (float32 rasters) restore the exact state.
class Trainer {
 public:
  explicit Trainer(const RunConfig& config);

  const RunConfig& config() const noexcept { return config_; }
  DepthNetwork& model() noexcept { return model_; }
  const DepthNetwork& model() const noexcept { return model_; }
  int epoch() const noexcept { return epoch_; }
  std::int64_t step() const noexcept { return step_; }

  /// One optimizer step on the mean loss over `batch` (prepared samples).
  /// Throws DivergenceError on a non-finite loss.
  LossBreakdown train_step(std::span<const RgbdSample> batch, double lr);

  /// One pass over `prepared` in the seeded order of the current epoch, with
  /// seeded augmentation. Returns the batch-mean losses.
  EpochLog run_epoch(const std::vector<RgbdSample>& prepared);
  bool step_budget_exhausted() const noexcept;

  std::string checkpoint_bytes() const;
  void save_checkpoint(const std::filesystem::path& path) const;
  /// Throws FormatError for malformed files and ConfigError when the stored
  /// tensors or digest disagree with the stored configuration.
  static Trainer from_checkpoint_bytes(std::string_view bytes);
  static Trainer load_checkpoint(const std::filesystem::path& path);

  /// Batch order of `epoch` for a dataset of `n` samples.
  std::vector<std::size_t> epoch_order(int epoch, std::size_t n) const;

 private:
  void apply_update(double lr, double inv_batch);

  RunConfig config_;
  DepthNetwork model_;
  std::vector<FeatureMap> adam_m_;
  std::vector<FeatureMap> adam_v_;
  int epoch_ = 0;
  std::int64_t step_ = 0;
};

/// Loads and prepares root/<split>; throws DataError when empty.
std::vector<RgbdSample> load_prepared(const std::filesystem::path& root, const std::string& split,
                                      const PreprocessSpec& spec);

/// Evaluation pair: network-sized image plus full-resolution ground truth.
struct EvalSample {
  FeatureMap image;
  DepthMap gt;
};
EvalSample prepare_eval_sample(const RgbdSample& sample, const PreprocessSpec& spec);

using DepthPredictor = std::function<DepthMap(const EvalSample&)>;

/// Unweighted sample means of depth and edge metrics. The predictor's output
/// is bilinearly upsampled to ground-truth resolution. Empty input is a DataError.
MetricReport evaluate(const DepthPredictor& predictor, const std::vector<EvalSample>& samples,
                      double epsilon_depth);
MetricReport evaluate(const DepthNetwork& model, const std::vector<EvalSample>& samples,
                      double epsilon_depth);
/// Predictor returning the ground truth itself.
DepthPredictor identity_predictor();

struct TrainRunOptions {
  std::filesystem::path data_root;
  std::filesystem::path out_dir;
  std::filesystem::path resume;  // empty: fresh run
  std::function<void(const EpochLog&)> on_epoch;
};

/// Trains on data_root/train, writing out_dir/checkpoint.ckpt after every
/// epoch and out_dir/epochs.csv. Returns the epoch log.
std::vector<EpochLog> run_training(const RunConfig& config, const TrainRunOptions& options);

}  // namespace sarpn
