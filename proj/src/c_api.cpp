#include "sarpn/sarpn.h"

#include <cstring>
#include <filesystem>
#include <string>

#include "sarpn/config.hpp"
#include "sarpn/data.hpp"
#include "sarpn/errors.hpp"
#include "sarpn/metrics.hpp"
#include "sarpn/ops.hpp"
#include "sarpn/plot.hpp"
#include "sarpn/raster_io.hpp"
#include "sarpn/trainer.hpp"

struct sarpn_config {
  sarpn::RunConfig config;
};

struct sarpn_model {
  sarpn::RunConfig config;
  sarpn::DepthNetwork network;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
sarpn_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return SARPN_OK;
  } catch (const sarpn::Error& e) {
    g_last_error = e.what();
    return static_cast<sarpn_status>(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return SARPN_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SARPN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SARPN_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return SARPN_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw sarpn::ConfigError(std::string(what) + " must not be null");
}

std::string str(const char* s, const char* what) {
  require(s, what);
  return s;
}

// Network-sized input image: used as-is when it already has the model's
// input size, otherwise resized and center cropped like training data.
sarpn::FeatureMap network_input(const sarpn::FeatureMap& image, const sarpn::RunConfig& config) {
  if (image.channels() != 3) {
    throw sarpn::DataError("input image must have 3 channels, got " +
                           std::to_string(image.channels()));
  }
  sarpn::RgbdSample sample{image, sarpn::make_depth(image.height(), image.width(), 1.0)};
  return sarpn::crop_to_target(sample, sarpn::effective_spec(sample, config.preprocess)).image;
}

// Keys that fix tensor shapes or input geometry. Training-only settings may
// differ between a checkpoint and the configuration it is evaluated with.
void check_same_architecture(const sarpn::RunConfig& stored, const sarpn::RunConfig& given) {
  static const char* const keys[] = {"levels", "stage_channels", "se_reduction", "height",
                                     "width", "fused_channels", "refine_hidden", "ablation",
                                     "precrop_height", "precrop_width"};
  const auto a = sarpn::to_key_values(stored);
  const auto b = sarpn::to_key_values(given);
  std::string diff;
  for (const char* k : keys) {
    if (a.get(k) != b.get(k)) {
      diff += std::string(diff.empty() ? "" : ", ") + k + " (checkpoint " + a.get(k) +
              ", config " + b.get(k) + ")";
    }
  }
  if (!diff.empty()) throw sarpn::ConfigError("checkpoint does not match the configuration: " + diff);
}

}  // namespace

extern "C" {

const char* sarpn_last_error(void) { return g_last_error.c_str(); }

const char* sarpn_status_name(sarpn_status status) {
  switch (status) {
    case SARPN_OK: return "ok";
    case SARPN_ERR_INTERNAL: return "internal_error";
    case SARPN_ERR_CONFIG: return "config_error";
    case SARPN_ERR_DATA: return "data_error";
    case SARPN_ERR_DIVERGENCE: return "divergence_error";
    case SARPN_ERR_IO: return "io_error";
  }
  return "unknown";
}

sarpn_status sarpn_config_create(const char* preset, sarpn_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    const std::string name = preset ? preset : "default";
    sarpn::RunConfig config;
    if (name == "desk") {
      config = sarpn::desk_config();
    } else if (name != "default") {
      throw sarpn::ConfigError("unknown preset '" + name + "'; valid presets: default, desk");
    }
    *out = new sarpn_config{config};
  });
}

void sarpn_config_destroy(sarpn_config* config) { delete config; }

sarpn_status sarpn_config_load(sarpn_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    const auto kv = sarpn::KeyValues::load(str(path, "path"));
    config->config = sarpn::run_config_from(kv, config->config);
  });
}

sarpn_status sarpn_config_set(sarpn_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    sarpn::KeyValues kv;
    kv.set(str(key, "key"), str(value, "value"));
    config->config = sarpn::run_config_from(kv, config->config);
  });
}

sarpn_status sarpn_config_validate(const sarpn_config* config) {
  return guarded([&] {
    require(config, "config");
    config->config.validate();
  });
}

sarpn_status sarpn_config_text(const sarpn_config* config, char* buf, size_t capacity,
                               size_t* needed) {
  return guarded([&] {
    require(config, "config");
    const std::string text = sarpn::to_key_values(config->config).to_text();
    if (needed) *needed = text.size() + 1;
    if (buf && capacity > 0) {
      const std::size_t n = std::min(capacity - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

sarpn_status sarpn_config_digest(const sarpn_config* config, uint64_t* digest) {
  return guarded([&] {
    require(config, "config");
    require(digest, "digest");
    *digest = sarpn::config_digest(config->config);
  });
}

void sarpn_generate_options_init(sarpn_generate_options* options) {
  if (!options) return;
  const sarpn::GenerateOptions d;
  options->seed = d.seed;
  options->count = d.count;
  options->height = d.height;
  options->width = d.width;
  options->n_objects = d.n_objects;
  options->min_depth = d.min_depth;
  options->max_depth = d.max_depth;
  options->levels = d.levels;
  options->split = nullptr;
}

sarpn_status sarpn_generate(const char* root, const sarpn_generate_options* options) {
  return guarded([&] {
    require(options, "options");
    sarpn::GenerateOptions o;
    o.seed = options->seed;
    o.count = options->count;
    o.height = options->height;
    o.width = options->width;
    o.n_objects = options->n_objects;
    o.min_depth = options->min_depth;
    o.max_depth = options->max_depth;
    o.levels = options->levels;
    if (options->split) o.split = options->split;
    sarpn::generate_dataset(str(root, "root"), o);
  });
}

sarpn_status sarpn_train(const sarpn_config* config, const char* data_root, const char* out_dir,
                         const char* resume, sarpn_epoch_callback callback, void* user) {
  return guarded([&] {
    require(config, "config");
    sarpn::TrainRunOptions o;
    o.data_root = str(data_root, "data_root");
    o.out_dir = str(out_dir, "out_dir");
    if (resume) o.resume = resume;
    if (callback) {
      o.on_epoch = [callback, user](const sarpn::EpochLog& e) {
        const sarpn_epoch_stats s{e.epoch, e.lr, e.total, e.depth, e.grad, e.normal};
        callback(&s, user);
      };
    }
    sarpn::run_training(config->config, o);
  });
}

sarpn_status sarpn_model_load(const char* checkpoint, sarpn_model** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    sarpn::Trainer trainer = sarpn::Trainer::load_checkpoint(str(checkpoint, "checkpoint"));
    *out = new sarpn_model{trainer.config(), std::move(trainer.model())};
  });
}

void sarpn_model_destroy(sarpn_model* model) { delete model; }

sarpn_status sarpn_model_config(const sarpn_model* model, sarpn_config** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = new sarpn_config{model->config};
  });
}

sarpn_status sarpn_evaluate(const sarpn_model* model, const sarpn_config* config,
                            const char* data_root, const char* split, const char* report_path) {
  return guarded([&] {
    if (!model) require(config, "config (identity oracle)");
    if (config) config->config.validate();
    if (model && config) check_same_architecture(model->config, config->config);
    const sarpn::RunConfig& rc = model ? model->config : config->config;
    const std::string report = str(report_path, "report_path");
    std::vector<sarpn::EvalSample> samples;
    for (const auto& s : sarpn::load_split(str(data_root, "data_root"), split ? split : "val")) {
      samples.push_back(sarpn::prepare_eval_sample(s, rc.preprocess));
    }
    const sarpn::MetricReport r =
        model ? sarpn::evaluate(model->network, samples, rc.loss.epsilon_depth)
              : sarpn::evaluate(sarpn::identity_predictor(), samples, rc.loss.epsilon_depth);
    sarpn::write_file(report, sarpn::format_report(r));
    sarpn::write_file(report + ".table", sarpn::format_report_table(r));
  });
}

void sarpn_predict_options_init(sarpn_predict_options* options) {
  if (!options) return;
  *options = sarpn_predict_options{0, 0, 0, 0.0, 0.0, 0.0, 0.0};
}

sarpn_status sarpn_predict(const sarpn_model* model, const char* rgb_path, const char* prefix,
                           const sarpn_predict_options* options) {
  return guarded([&] {
    require(model, "model");
    sarpn_predict_options opts;
    sarpn_predict_options_init(&opts);
    if (options) opts = *options;
    const std::string base = str(prefix, "prefix");
    const sarpn::FeatureMap image =
        network_input(sarpn::read_raster(str(rgb_path, "rgb_path")), model->config);
    const sarpn::DepthPyramid out = model->network.predict(image);
    sarpn::write_raster(base + ".dep", out.depths.front());
    if (opts.pyramid) {
      for (std::size_t k = 0; k < out.depths.size(); ++k) {
        sarpn::write_raster(base + ".l" + std::to_string(k + 1) + ".dep", out.depths[k]);
      }
      for (std::size_t k = 0; k < out.residuals.size(); ++k) {
        sarpn::write_raster(base + ".l" + std::to_string(k + 1) + ".res.dep", out.residuals[k]);
      }
    }
    if (opts.pointcloud) {
      sarpn::CameraIntrinsics intr = sarpn::CameraIntrinsics::synthetic(image.height(), image.width());
      if (opts.has_intrinsics) intr = {opts.fx, opts.fy, opts.cx, opts.cy};
      intr.validate();
      const sarpn::DepthMap full =
          sarpn::bilinear_resize(out.depths.front(), image.height(), image.width());
      sarpn::write_file(base + ".xyz",
                        sarpn::format_pointcloud(sarpn::to_pointcloud(full, intr, &image)));
    }
  });
}

sarpn_status sarpn_plot_depth(const char* dep_path, const char* out_path) {
  return guarded([&] {
    const sarpn::FeatureMap depth = sarpn::read_raster(str(dep_path, "dep_path"));
    if (depth.channels() != 1) {
      throw sarpn::DataError("depth raster must have 1 channel, got " +
                             std::to_string(depth.channels()));
    }
    sarpn::write_file(str(out_path, "out_path"), sarpn::encode_ppm(sarpn::render_depth(depth)));
  });
}

sarpn_status sarpn_plot_losses(const char* csv_path, const char* out_path) {
  return guarded([&] {
    const auto log = sarpn::parse_epoch_csv(sarpn::read_file(str(csv_path, "csv_path")));
    sarpn::write_file(str(out_path, "out_path"),
                      sarpn::encode_ppm(sarpn::plot_loss_curve(log).image));
  });
}

}  // extern "C"
