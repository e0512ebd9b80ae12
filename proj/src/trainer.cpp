#include "sarpn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "sarpn/errors.hpp"
#include "sarpn/raster_io.hpp"

namespace sarpn {
namespace {

constexpr std::string_view kCheckpointMagic = "SARPN-CHECKPOINT";
constexpr int kCheckpointVersion = 1;

void round_to_float(FeatureMap& m) {
  for (double& v : m.data()) v = static_cast<float>(v);
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view line() {
    const auto end = bytes_.find('\n', pos_);
    if (end == std::string_view::npos) throw FormatError("unterminated checkpoint line", pos_);
    start_ = pos_;
    auto out = bytes_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return out;
  }
  std::string field(std::string_view key) {
    const auto l = line();
    if (l.size() <= key.size() || l.substr(0, key.size()) != key || l[key.size()] != '=') {
      throw FormatError("expected checkpoint field '" + std::string(key) + "'", start_);
    }
    return std::string(l.substr(key.size() + 1));
  }
  long long integer(std::string_view key) {
    const std::string v = field(key);
    char* end = nullptr;
    const long long out = std::strtoll(v.c_str(), &end, 10);
    if (v.empty() || *end != '\0') throw FormatError("bad integer for " + std::string(key), start_);
    return out;
  }
  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::string_view rest() const { return bytes_.substr(pos_); }
  std::size_t line_start() const { return start_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
  std::size_t start_ = 0;
};

}  // namespace

double learning_rate(const TrainConfig& config, int epoch) {
  return config.lr_init * std::pow(config.lr_decay_factor, epoch / config.lr_decay_every);
}

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, std::int64_t t, double lr, const TrainConfig& c) {
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    param[i] -= lr * (m_hat / (std::sqrt(v_hat) + c.adam_epsilon) + c.weight_decay * param[i]);
  }
}

LossBreakdown accumulate_gradients(const DepthNetwork& model, const RgbdSample& sample,
                                   const LossConfig& loss) {
  Tape tape;
  const auto trace = model.forward(tape, tape.input(sample.image));
  std::vector<DepthMap> pred;
  for (Var v : trace.depths) pred.push_back(tape.value(v));
  const auto gt = build_gt_pyramid(sample.depth, static_cast<int>(pred.size()));
  std::vector<DepthMap> grads;
  LossBreakdown out = total_loss(pred, gt, loss, &grads);
  if (!std::isfinite(out.total)) return out;
  for (std::size_t k = 0; k < trace.depths.size(); ++k) tape.seed(trace.depths[k], grads[k]);
  tape.backward();
  return out;
}

std::string format_epoch_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,lr,total_loss,l_depth,l_grad,l_normal\n";
  char line[256];
  for (const auto& e : log) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch, e.lr, e.total,
                  e.depth, e.grad, e.normal);
    out += line;
  }
  return out;
}

std::vector<EpochLog> parse_epoch_csv(std::string_view text) {
  std::vector<EpochLog> out;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line(text.substr(pos, end - pos));
    const std::size_t start = pos;
    pos = end + 1;
    if (line_no++ == 0) {
      if (line != "epoch,lr,total_loss,l_depth,l_grad,l_normal") {
        throw FormatError("unexpected epoch CSV header", start);
      }
      continue;
    }
    if (line.empty()) continue;
    EpochLog e;
    char tail = 0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf%c", &e.epoch, &e.lr, &e.total, &e.depth,
                    &e.grad, &e.normal, &tail) != 6) {
      throw FormatError("malformed epoch CSV row " + std::to_string(line_no), start);
    }
    out.push_back(e);
  }
  if (line_no == 0) throw FormatError("empty epoch CSV", 0);
  return out;
}

Trainer::Trainer(const RunConfig& config) : config_(config), model_(config.model) {
  config.validate();
  auto& params = model_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const FeatureMap& p = params[i].value;
    adam_m_.emplace_back(p.channels(), p.height(), p.width());
    adam_v_.emplace_back(p.channels(), p.height(), p.width());
  }
}

void Trainer::apply_update(double lr, double inv_batch) {
  ++step_;
  auto& params = model_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    p.grad *= inv_batch;
    adam_update(p.value.data(), p.grad.data(), adam_m_[i].data(), adam_v_[i].data(), step_, lr,
                config_.train);
    round_to_float(p.value);
    round_to_float(adam_m_[i]);
    round_to_float(adam_v_[i]);
  }
}

LossBreakdown Trainer::train_step(std::span<const RgbdSample> batch, double lr) {
  if (batch.empty()) throw DataError("empty training batch");
  model_.parameters().zero_grad();
  LossBreakdown mean;
  for (const auto& sample : batch) {
    const LossBreakdown b = accumulate_gradients(model_, sample, config_.loss);
    if (!std::isfinite(b.total)) {
      throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch_) +
                            ", step " + std::to_string(step_ + 1));
    }
    if (mean.per_level.empty()) mean.per_level.resize(b.per_level.size());
    for (std::size_t k = 0; k < b.per_level.size(); ++k) {
      mean.per_level[k].depth += b.per_level[k].depth;
      mean.per_level[k].grad += b.per_level[k].grad;
      mean.per_level[k].normal += b.per_level[k].normal;
    }
    mean.total += b.total;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& l : mean.per_level) {
    l.depth *= inv;
    l.grad *= inv;
    l.normal *= inv;
  }
  mean.total *= inv;
  apply_update(lr, inv);
  return mean;
}

std::vector<std::size_t> Trainer::epoch_order(int epoch, std::size_t n) const {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(mix_seed(config_.train.seed, static_cast<std::uint64_t>(epoch)));
  // Fisher-Yates with explicit draws; std::shuffle's algorithm is unspecified.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

bool Trainer::step_budget_exhausted() const noexcept {
  return config_.train.max_steps > 0 && step_ >= config_.train.max_steps;
}

EpochLog Trainer::run_epoch(const std::vector<RgbdSample>& prepared) {
  if (prepared.empty()) throw DataError("training set is empty");
  const double lr = learning_rate(config_.train, epoch_);
  const auto order = epoch_order(epoch_, prepared.size());
  const std::uint64_t epoch_seed =
      mix_seed(config_.train.seed ^ 0xA5A5A5A5ull, static_cast<std::uint64_t>(epoch_));
  EpochLog log;
  log.epoch = epoch_;
  log.lr = lr;
  int batches = 0;
  const std::size_t bs = static_cast<std::size_t>(config_.train.batch_size);
  std::vector<RgbdSample> batch;
  for (std::size_t start = 0; start < order.size() && !step_budget_exhausted(); start += bs) {
    batch.clear();
    for (std::size_t j = start; j < std::min(start + bs, order.size()); ++j) {
      const RgbdSample& s = prepared[order[j]];
      batch.push_back(config_.train.augment ? augment(s, mix_seed(epoch_seed, j)) : s);
    }
    const LossBreakdown b = train_step(batch, lr);
    log.total += b.total;
    for (const auto& l : b.per_level) {
      log.depth += l.depth;
      log.grad += l.grad;
      log.normal += l.normal;
    }
    ++batches;
  }
  if (batches > 0) {
    log.total /= batches;
    log.depth /= batches;
    log.grad /= batches;
    log.normal /= batches;
  }
  ++epoch_;
  return log;
}

std::string Trainer::checkpoint_bytes() const {
  std::string out;
  out += std::string(kCheckpointMagic) + "\n";
  out += "format_version=" + std::to_string(kCheckpointVersion) + "\n";
  out += "epoch=" + std::to_string(epoch_) + "\n";
  out += "step=" + std::to_string(step_) + "\n";
  out += "seed=" + std::to_string(config_.train.seed) + "\n";
  out += "config_digest=" + hex64(config_digest(config_)) + "\n";
  const std::string cfg = to_key_values(config_).to_text();
  out += "config_lines=" + std::to_string(std::count(cfg.begin(), cfg.end(), '\n')) + "\n";
  out += cfg;
  const auto& params = model_.parameters();
  out += "tensors=" + std::to_string(params.size() * 3) + "\n";
  for (std::size_t i = 0; i < params.size(); ++i) {
    out += "tensor=" + params[i].name + " param\n" + encode_raster(params[i].value);
    out += "tensor=" + params[i].name + " adam_m\n" + encode_raster(adam_m_[i]);
    out += "tensor=" + params[i].name + " adam_v\n" + encode_raster(adam_v_[i]);
  }
  out += "end\n";
  return out;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  write_file(path, checkpoint_bytes());
}

Trainer Trainer::from_checkpoint_bytes(std::string_view bytes) {
  HeaderReader r(bytes);
  if (r.line() != kCheckpointMagic) throw FormatError("not a checkpoint file", 0);
  if (r.integer("format_version") != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version", r.line_start());
  }
  const long long epoch = r.integer("epoch");
  const long long step = r.integer("step");
  (void)r.field("seed");
  const std::string digest = r.field("config_digest");
  const long long n_lines = r.integer("config_lines");
  if (epoch < 0 || step < 0 || n_lines < 0) throw FormatError("negative checkpoint counter", r.line_start());
  std::string cfg_text;
  for (long long i = 0; i < n_lines; ++i) cfg_text += std::string(r.line()) + "\n";
  const RunConfig config = run_config_from(KeyValues::parse(cfg_text));
  if (hex64(config_digest(config)) != digest) {
    throw ConfigError("checkpoint config digest " + digest + " does not match its stored configuration");
  }
  Trainer trainer(config);
  trainer.epoch_ = static_cast<int>(epoch);
  trainer.step_ = step;
  auto& params = trainer.model_.parameters();
  const long long n_tensors = r.integer("tensors");
  if (n_tensors != static_cast<long long>(params.size() * 3)) {
    throw ConfigError("checkpoint holds " + std::to_string(n_tensors) + " tensors, model expects " +
                      std::to_string(params.size() * 3));
  }
  static constexpr const char* kRoles[3] = {"param", "adam_m", "adam_v"};
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (int role = 0; role < 3; ++role) {
      const std::string expected = params[i].name + " " + kRoles[role];
      const auto name = r.field("tensor");
      if (name != expected) {
        throw ConfigError("checkpoint tensor '" + name + "' does not match model tensor '" +
                          expected + "'");
      }
      std::size_t used = 0;
      FeatureMap value = decode_raster(r.rest(), &used, r.pos());
      r.advance(used);
      FeatureMap& target = role == 0 ? params[i].value
                           : role == 1 ? trainer.adam_m_[i]
                                       : trainer.adam_v_[i];
      if (!value.same_shape(target)) {
        throw ConfigError("checkpoint tensor " + expected + " has shape " + value.shape_string() +
                          ", model expects " + target.shape_string());
      }
      target = std::move(value);
    }
  }
  if (r.line() != "end" || !r.rest().empty()) {
    throw FormatError("missing checkpoint terminator", r.line_start());
  }
  return trainer;
}

Trainer Trainer::load_checkpoint(const std::filesystem::path& path) {
  return from_checkpoint_bytes(read_file(path));
}

std::vector<RgbdSample> load_prepared(const std::filesystem::path& root, const std::string& split,
                                      const PreprocessSpec& spec) {
  std::vector<RgbdSample> out;
  for (const auto& s : load_split(root, split)) out.push_back(prepare_sample(s, spec));
  if (out.empty()) throw DataError("dataset split '" + split + "' is empty: " + root.string());
  return out;
}

EvalSample prepare_eval_sample(const RgbdSample& sample, const PreprocessSpec& spec) {
  const RgbdSample cropped = crop_to_target(sample, effective_spec(sample, spec));
  return {cropped.image, cropped.depth};
}

MetricReport evaluate(const DepthPredictor& predictor, const std::vector<EvalSample>& samples,
                      double epsilon_depth) {
  if (samples.empty()) throw DataError("evaluation set is empty");
  MetricAccumulator acc;
  for (const auto& s : samples) {
    DepthMap pred = predictor(s);
    if (!pred.same_spatial(s.gt)) pred = bilinear_resize(pred, s.gt.height(), s.gt.width());
    acc.add(pred, s.gt, epsilon_depth);
  }
  return acc.report();
}

MetricReport evaluate(const DepthNetwork& model, const std::vector<EvalSample>& samples,
                      double epsilon_depth) {
  return evaluate([&model](const EvalSample& s) { return model.predict(s.image).depths.front(); },
                  samples, epsilon_depth);
}

DepthPredictor identity_predictor() {
  return [](const EvalSample& s) { return s.gt; };
}

std::vector<EpochLog> run_training(const RunConfig& config, const TrainRunOptions& options) {
  Trainer trainer = options.resume.empty() ? Trainer(config) : Trainer::load_checkpoint(options.resume);
  if (!options.resume.empty() && config_digest(trainer.config()) != config_digest(config)) {
    throw ConfigError("resume checkpoint was trained with a different configuration");
  }
  const auto prepared = load_prepared(options.data_root, "train", config.preprocess);
  std::filesystem::create_directories(options.out_dir);
  const auto csv_path = options.out_dir / "epochs.csv";
  std::vector<EpochLog> log;
  if (!options.resume.empty() && std::filesystem::exists(csv_path)) {
    log = parse_epoch_csv(read_file(csv_path));
    log.erase(std::remove_if(log.begin(), log.end(),
                             [&](const EpochLog& e) { return e.epoch >= trainer.epoch(); }),
              log.end());
  }
  while (trainer.epoch() < config.train.epochs && !trainer.step_budget_exhausted()) {
    const EpochLog e = trainer.run_epoch(prepared);
    log.push_back(e);
    trainer.save_checkpoint(options.out_dir / "checkpoint.ckpt");
    write_file(csv_path, format_epoch_csv(log));
    if (options.on_epoch) options.on_epoch(e);
  }
  if (log.empty()) write_file(csv_path, format_epoch_csv(log));
  return log;
}

}  // namespace sarpn
