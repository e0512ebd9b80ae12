/* C interface to the depth estimation library. All functions return a
 * sarpn_status; on failure sarpn_last_error() describes the cause (the
 * string is thread-local and valid until the next call on that thread). */
#ifndef SARPN_SARPN_H
#define SARPN_SARPN_H

#include <stddef.h>
#include <stdint.h>

#if defined(SARPN_BUILDING)
#define SARPN_API __attribute__((visibility("default")))
#else
#define SARPN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sarpn_status {
  SARPN_OK = 0,
  SARPN_ERR_INTERNAL = 1,
  SARPN_ERR_CONFIG = 2,
  SARPN_ERR_DATA = 3,
  SARPN_ERR_DIVERGENCE = 4,
  SARPN_ERR_IO = 5
} sarpn_status;

typedef struct sarpn_config sarpn_config;
typedef struct sarpn_model sarpn_model;

SARPN_API const char* sarpn_last_error(void);
SARPN_API const char* sarpn_status_name(sarpn_status status);

/* ---- configuration ---- */

/* preset: "default" (module defaults) or "desk" (compact CPU widths). */
SARPN_API sarpn_status sarpn_config_create(const char* preset, sarpn_config** out);
SARPN_API void sarpn_config_destroy(sarpn_config* config);
/* Applies a `key = value` file on top of the current values. Keys and value
 * syntax are checked here; cross-field ranges only by sarpn_config_validate
 * so that related keys can be changed one at a time. */
SARPN_API sarpn_status sarpn_config_load(sarpn_config* config, const char* path);
SARPN_API sarpn_status sarpn_config_set(sarpn_config* config, const char* key, const char* value);
SARPN_API sarpn_status sarpn_config_validate(const sarpn_config* config);
/* Copies the fully materialised `key = value` text into buf (NUL-terminated,
 * truncated to capacity). *needed receives the full length plus one. */
SARPN_API sarpn_status sarpn_config_text(const sarpn_config* config, char* buf, size_t capacity,
                                         size_t* needed);
SARPN_API sarpn_status sarpn_config_digest(const sarpn_config* config, uint64_t* digest);

/* ---- data ---- */

typedef struct sarpn_generate_options {
  uint64_t seed;
  int32_t count;
  int32_t height;
  int32_t width;
  int32_t n_objects;
  double min_depth;
  double max_depth;
  int32_t levels;
  const char* split; /* "train", "val", ... */
} sarpn_generate_options;

SARPN_API void sarpn_generate_options_init(sarpn_generate_options* options);
SARPN_API sarpn_status sarpn_generate(const char* root, const sarpn_generate_options* options);

/* ---- training ---- */

typedef struct sarpn_epoch_stats {
  int32_t epoch;
  double lr;
  double total_loss;
  double l_depth;
  double l_grad;
  double l_normal;
} sarpn_epoch_stats;

typedef void (*sarpn_epoch_callback)(const sarpn_epoch_stats* stats, void* user);

/* Trains on data_root/train; writes out_dir/checkpoint.ckpt and
 * out_dir/epochs.csv. resume may be NULL or a checkpoint path. */
SARPN_API sarpn_status sarpn_train(const sarpn_config* config, const char* data_root,
                                   const char* out_dir, const char* resume,
                                   sarpn_epoch_callback callback, void* user);

/* ---- inference ---- */

SARPN_API sarpn_status sarpn_model_load(const char* checkpoint, sarpn_model** out);
SARPN_API void sarpn_model_destroy(sarpn_model* model);
/* Configuration stored in the checkpoint; caller destroys it. */
SARPN_API sarpn_status sarpn_model_config(const sarpn_model* model, sarpn_config** out);

/* Evaluates on data_root/<split>. Writes the key=value report to
 * report_path and the aligned tables to report_path + ".table". With a NULL
 * model, the ground truth itself is scored (identity oracle) using the
 * preprocessing of `config`. */
SARPN_API sarpn_status sarpn_evaluate(const sarpn_model* model, const sarpn_config* config,
                                      const char* data_root, const char* split,
                                      const char* report_path);

typedef struct sarpn_predict_options {
  int32_t pyramid;    /* also write PREFIX.l{i}.dep and PREFIX.l{i}.res.dep */
  int32_t pointcloud; /* also write PREFIX.xyz */
  int32_t has_intrinsics;
  double fx, fy, cx, cy; /* pixel units of the network input */
} sarpn_predict_options;

SARPN_API void sarpn_predict_options_init(sarpn_predict_options* options);
SARPN_API sarpn_status sarpn_predict(const sarpn_model* model, const char* rgb_path,
                                     const char* prefix, const sarpn_predict_options* options);

/* ---- plotting (binary PPM output) ---- */

SARPN_API sarpn_status sarpn_plot_depth(const char* dep_path, const char* out_path);
SARPN_API sarpn_status sarpn_plot_losses(const char* csv_path, const char* out_path);

#ifdef __cplusplus
}
#endif

#endif
