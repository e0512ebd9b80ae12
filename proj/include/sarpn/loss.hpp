#pragma once

#include <vector>

#include "sarpn/feature_map.hpp"

namespace sarpn {

struct LossConfig {
  double alpha = 0.5;            // offset inside the log penalties
  double epsilon_depth = 1e-3;   // predictions are clamped to at least this

  void validate() const;
};

struct LevelLoss {
  double depth = 0.0;
  double grad = 0.0;
  double normal = 0.0;
  double sum() const noexcept { return depth + grad + normal; }
};

struct LossBreakdown {
  std::vector<LevelLoss> per_level;  // per_level[k] is level k+1
  double total = 0.0;
};

/// maps[0] = gt; maps[k+1] = 2x2 mean of maps[k] over its valid (> 0)
/// pixels. Holes (0) are allowed; negative or non-finite values are a
/// DataError, odd sizes a ConfigError.
std::vector<DepthMap> build_gt_pyramid(const DepthMap& gt, int levels);

// Per-level terms. Ground-truth pixels <= 0 are holes and are excluded, and
// gradient/normal stencils touching a hole are dropped. When `grad` is given
// the derivative w.r.t. `pred` is accumulated into it.

/// mean over valid p of ln(|max(d, eps) - g| + alpha).
double depth_loss(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg,
                  DepthMap* grad = nullptr);
/// With e = max(d, eps) - g and forward differences (zero at the last
/// row/column): mean ln(|dx e| + alpha) + mean ln(|dy e| + alpha).
double gradient_loss(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg,
                     DepthMap* grad = nullptr);
/// Mean of 1 - cos between normals (-dx, -dy, 1) of prediction and truth.
double normal_loss(const DepthMap& pred, const DepthMap& gt,
                   const LossConfig& cfg = {}, DepthMap* grad = nullptr);

/// Sum over levels of the three terms. `pred` and `gt` must have equal level
/// counts and sizes. When `grads` is non-null it is resized to one map per
/// level holding d(total)/d(pred).
LossBreakdown total_loss(const std::vector<DepthMap>& pred,
                         const std::vector<DepthMap>& gt, const LossConfig& cfg,
                         std::vector<DepthMap>* grads = nullptr);

}  // namespace sarpn
