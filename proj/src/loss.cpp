#include "sarpn/loss.hpp"

#include <array>
#include <cmath>

#include "sarpn/errors.hpp"
#include "sarpn/ops.hpp"

namespace sarpn {
namespace {

void check_pair(const DepthMap& pred, const DepthMap& gt, const char* what) {
  if (pred.channels() != 1 || gt.channels() != 1 || !pred.same_shape(gt)) {
    throw ConfigError(std::string(what) + ": prediction " + pred.shape_string() +
                      " and ground truth " + gt.shape_string() + " differ");
  }
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Clamped prediction and the derivative of the clamp.
struct Clamped {
  double value;
  double slope;
};

Clamped clamp_depth(double d, double eps) {
  // NaN is kept so the divergence guard sees it
  return (d >= eps || std::isnan(d)) ? Clamped{d, 1.0} : Clamped{eps, 0.0};
}

bool valid(const DepthMap& gt, int y, int x) { return gt.at(y, x) > 0.0; }

}  // namespace

void LossConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
  if (!(epsilon_depth > 0.0)) throw ConfigError("epsilon_depth must be positive");
}

std::vector<DepthMap> build_gt_pyramid(const DepthMap& gt, int levels) {
  if (levels < 1) throw ConfigError("ground-truth pyramid needs at least one level");
  if (gt.channels() != 1) throw ConfigError("ground truth must be single-channel");
  bool any = false;
  for (double v : gt.data()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw DataError("ground-truth depth must be finite and non-negative");
    }
    any = any || v > 0.0;
  }
  if (!any) throw DataError("ground-truth depth has no valid pixels");
  std::vector<DepthMap> maps{gt};
  for (int k = 1; k < levels; ++k) {
    maps.push_back(avg_pool2x2(maps.back(), /*skip_nonpositive=*/true));
  }
  return maps;
}

double depth_loss(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg,
                  DepthMap* grad) {
  check_pair(pred, gt, "depth_loss");
  double sum = 0.0;
  std::size_t n = 0;
  const auto d = pred.data();
  const auto g = gt.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (g[i] <= 0.0) continue;
    sum += std::log(std::abs(clamp_depth(d[i], cfg.epsilon_depth).value - g[i]) + cfg.alpha);
    ++n;
  }
  if (n == 0) throw DataError("depth_loss: no valid ground-truth pixels");
  if (grad != nullptr) {
    auto out = grad->data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (g[i] <= 0.0) continue;
      const Clamped c = clamp_depth(d[i], cfg.epsilon_depth);
      const double e = c.value - g[i];
      out[i] += c.slope * sign(e) / (std::abs(e) + cfg.alpha) / static_cast<double>(n);
    }
  }
  return sum / static_cast<double>(n);
}

double gradient_loss(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg,
                     DepthMap* grad) {
  check_pair(pred, gt, "gradient_loss");
  const int h = pred.height();
  const int w = pred.width();
  DepthMap err = make_depth(h, w);
  DepthMap slope = make_depth(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Clamped c = clamp_depth(pred.at(y, x), cfg.epsilon_depth);
      err.at(y, x) = c.value - gt.at(y, x);
      slope.at(y, x) = c.slope;
    }
  }
  double total = 0.0;
  for (int axis = 0; axis < 2; ++axis) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!valid(gt, y, x)) continue;
        const int y1 = axis == 1 ? y + 1 : y;
        const int x1 = axis == 0 ? x + 1 : x;
        const bool border = y1 >= h || x1 >= w;
        if (!border && !valid(gt, y1, x1)) continue;
        const double diff = border ? 0.0 : err.at(y1, x1) - err.at(y, x);
        sum += std::log(std::abs(diff) + cfg.alpha);
        ++n;
      }
    }
    if (n == 0) continue;
    total += sum / static_cast<double>(n);
    if (grad == nullptr) continue;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!valid(gt, y, x)) continue;
        const int y1 = axis == 1 ? y + 1 : y;
        const int x1 = axis == 0 ? x + 1 : x;
        if (y1 >= h || x1 >= w || !valid(gt, y1, x1)) continue;
        const double diff = err.at(y1, x1) - err.at(y, x);
        const double g = sign(diff) / (std::abs(diff) + cfg.alpha) / static_cast<double>(n);
        grad->at(y1, x1) += g * slope.at(y1, x1);
        grad->at(y, x) -= g * slope.at(y, x);
      }
    }
  }
  return total;
}

double normal_loss(const DepthMap& pred, const DepthMap& gt, const LossConfig& cfg,
                   DepthMap* grad) {
  check_pair(pred, gt, "normal_loss");
  const int h = pred.height();
  const int w = pred.width();
  auto clamped = [&](int y, int x) { return clamp_depth(pred.at(y, x), cfg.epsilon_depth); };
  struct Term {
    int y, x;
    std::array<double, 2> dcos;  // d cos / d(dx_pred), d cos / d(dy_pred)
  };
  double sum = 0.0;
  std::size_t count = 0;
  std::vector<Term> terms;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!valid(gt, y, x)) continue;
      const bool has_right = x + 1 < w;
      const bool has_down = y + 1 < h;
      if ((has_right && !valid(gt, y, x + 1)) || (has_down && !valid(gt, y + 1, x))) continue;
      const double d0 = clamped(y, x).value;
      const double pdx = has_right ? clamped(y, x + 1).value - d0 : 0.0;
      const double pdy = has_down ? clamped(y + 1, x).value - d0 : 0.0;
      const double gdx = has_right ? gt.at(y, x + 1) - gt.at(y, x) : 0.0;
      const double gdy = has_down ? gt.at(y + 1, x) - gt.at(y, x) : 0.0;
      const std::array<double, 3> a{-pdx, -pdy, 1.0};
      const std::array<double, 3> b{-gdx, -gdy, 1.0};
      const double na = std::sqrt(a[0] * a[0] + a[1] * a[1] + 1.0);
      const double nb = std::sqrt(b[0] * b[0] + b[1] * b[1] + 1.0);
      const double dot = a[0] * b[0] + a[1] * b[1] + 1.0;
      const double cos = dot / (na * nb);
      sum += 1.0 - cos;
      ++count;
      if (grad != nullptr) {
        // d(1 - cos)/d(pdx) = d cos / d a_x, since a_x = -pdx.
        const double gx = b[0] / (na * nb) - cos * a[0] / (na * na);
        const double gy = b[1] / (na * nb) - cos * a[1] / (na * na);
        terms.push_back({y, x, {gx, gy}});
      }
    }
  }
  if (count == 0) return 0.0;
  if (grad != nullptr) {
    const double inv = 1.0 / static_cast<double>(count);
    for (const Term& t : terms) {
      if (t.x + 1 < w) {
        grad->at(t.y, t.x + 1) += inv * t.dcos[0] * clamped(t.y, t.x + 1).slope;
        grad->at(t.y, t.x) -= inv * t.dcos[0] * clamped(t.y, t.x).slope;
      }
      if (t.y + 1 < h) {
        grad->at(t.y + 1, t.x) += inv * t.dcos[1] * clamped(t.y + 1, t.x).slope;
        grad->at(t.y, t.x) -= inv * t.dcos[1] * clamped(t.y, t.x).slope;
      }
    }
  }
  return sum / static_cast<double>(count);
}

LossBreakdown total_loss(const std::vector<DepthMap>& pred,
                         const std::vector<DepthMap>& gt, const LossConfig& cfg,
                         std::vector<DepthMap>* grads) {
  cfg.validate();
  if (pred.size() != gt.size() || pred.empty()) {
    throw ConfigError("loss pyramids differ: " + std::to_string(pred.size()) +
                      " predicted levels vs " + std::to_string(gt.size()) +
                      " ground-truth levels");
  }
  if (grads != nullptr) {
    grads->clear();
    for (const auto& p : pred) grads->push_back(make_depth(p.height(), p.width()));
  }
  LossBreakdown out;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    DepthMap* g = grads != nullptr ? &(*grads)[k] : nullptr;
    LevelLoss level;
    level.depth = depth_loss(pred[k], gt[k], cfg, g);
    level.grad = gradient_loss(pred[k], gt[k], cfg, g);
    level.normal = normal_loss(pred[k], gt[k], cfg, g);
    out.per_level.push_back(level);
    out.total += level.sum();
  }
  return out;
}

}  // namespace sarpn
