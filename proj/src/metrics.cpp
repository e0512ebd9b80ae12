#include "sarpn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sarpn/errors.hpp"
#include "sarpn/ops.hpp"

namespace sarpn {
namespace {

const DepthMap& match_size(const DepthMap& pred, const DepthMap& gt, DepthMap& storage) {
  if (pred.channels() != 1 || gt.channels() != 1) {
    throw ConfigError("metrics expect single-channel depth maps");
  }
  if (pred.same_spatial(gt)) return pred;
  storage = bilinear_resize(pred, gt.height(), gt.width());
  return storage;
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string threshold_tag(double t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%.2f", t);
  return buf;
}

}  // namespace

DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt, double epsilon_depth) {
  DepthMap resized;
  const DepthMap& d = match_size(pred, gt, resized);
  double rel = 0.0, sq = 0.0, lg = 0.0;
  std::size_t n = 0, d1 = 0, d2 = 0, d3 = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double g = gt.data()[i];
    if (!(g > 0.0)) continue;
    const double p = std::max(d.data()[i], epsilon_depth);
    const double err = p - g;
    rel += std::abs(err) / g;
    sq += err * err;
    lg += std::abs(std::log10(p) - std::log10(g));
    const double ratio = std::max(p / g, g / p);
    if (ratio < 1.25) ++d1;
    if (ratio < 1.25 * 1.25) ++d2;
    if (ratio < 1.25 * 1.25 * 1.25) ++d3;
    ++n;
  }
  if (n == 0) throw DataError("depth metrics: ground truth has no valid pixels");
  const double inv = 1.0 / static_cast<double>(n);
  return {rel * inv, std::sqrt(sq * inv), lg * inv,
          d1 * inv, d2 * inv, d3 * inv};
}

DepthMap sobel_magnitude(const DepthMap& depth) {
  const int h = depth.height();
  const int w = depth.width();
  auto at = [&](int y, int x) {
    return depth.at(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1));
  };
  DepthMap out = make_depth(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (at(y - 1, x + 1) + 2.0 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y, x - 1) + at(y + 1, x - 1));
      const double gy = (at(y + 1, x - 1) + 2.0 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2.0 * at(y - 1, x) + at(y - 1, x + 1));
      out.at(y, x) = std::sqrt(gx * gx + gy * gy) / 8.0;
    }
  }
  return out;
}

EdgeScores edge_metrics(const DepthMap& pred, const DepthMap& gt, double threshold) {
  DepthMap resized;
  const DepthMap& d = match_size(pred, gt, resized);
  const DepthMap pm = sobel_magnitude(d);
  const DepthMap gm = sobel_magnitude(gt);
  const int h = gt.height();
  const int w = gt.width();
  std::size_t tp = 0, pred_edges = 0, gt_edges = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool usable = true;
      for (int dy = -1; dy <= 1 && usable; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (!(gt.at(std::clamp(y + dy, 0, h - 1), std::clamp(x + dx, 0, w - 1)) > 0.0)) {
            usable = false;
            break;
          }
        }
      }
      if (!usable) continue;
      const bool pe = pm.at(y, x) > threshold;
      const bool ge = gm.at(y, x) > threshold;
      pred_edges += pe;
      gt_edges += ge;
      tp += pe && ge;
    }
  }
  EdgeScores s;
  s.precision = pred_edges > 0 ? static_cast<double>(tp) / pred_edges : (gt_edges == 0 ? 1.0 : 0.0);
  s.recall = gt_edges > 0 ? static_cast<double>(tp) / gt_edges : (pred_edges == 0 ? 1.0 : 0.0);
  s.f1 = s.precision + s.recall > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

void MetricAccumulator::add(const DepthMap& pred, const DepthMap& gt, double epsilon_depth) {
  const DepthMetrics m = depth_metrics(pred, gt, epsilon_depth);
  sum_.depth.rel += m.rel;
  sum_.depth.rms += m.rms;
  sum_.depth.log10 += m.log10;
  sum_.depth.delta1 += m.delta1;
  sum_.depth.delta2 += m.delta2;
  sum_.depth.delta3 += m.delta3;
  for (std::size_t t = 0; t < kEdgeThresholds.size(); ++t) {
    const EdgeScores e = edge_metrics(pred, gt, kEdgeThresholds[t]);
    sum_.edge[t].precision += e.precision;
    sum_.edge[t].recall += e.recall;
    sum_.edge[t].f1 += e.f1;
  }
  ++n_;
}

MetricReport MetricAccumulator::report() const {
  if (n_ == 0) throw DataError("no samples were evaluated");
  const double inv = 1.0 / static_cast<double>(n_);
  MetricReport r = sum_;
  r.depth.rel *= inv;
  r.depth.rms *= inv;
  r.depth.log10 *= inv;
  r.depth.delta1 *= inv;
  r.depth.delta2 *= inv;
  r.depth.delta3 *= inv;
  for (auto& e : r.edge) {
    e.precision *= inv;
    e.recall *= inv;
    e.f1 *= inv;
  }
  r.samples = n_;
  return r;
}

std::vector<std::string> report_keys() {
  std::vector<std::string> keys{"rel", "rms", "log10", "delta1", "delta2", "delta3"};
  for (double t : kEdgeThresholds) {
    const std::string tag = threshold_tag(t);
    keys.push_back("edge_precision_" + tag);
    keys.push_back("edge_recall_" + tag);
    keys.push_back("edge_f1_" + tag);
  }
  return keys;
}

std::string format_report(const MetricReport& r) {
  std::vector<double> values{r.depth.rel,    r.depth.rms,    r.depth.log10,
                             r.depth.delta1, r.depth.delta2, r.depth.delta3};
  for (const auto& e : r.edge) {
    values.push_back(e.precision);
    values.push_back(e.recall);
    values.push_back(e.f1);
  }
  const auto keys = report_keys();
  std::string out;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    out += keys[i] + "=" + format_number(values[i]) + "\n";
  }
  return out;
}

std::string format_report_table(const MetricReport& r) {
  char line[256];
  std::string out;
  std::snprintf(line, sizeof(line), "%-8s %-8s %-8s %-10s %-10s %-10s\n", "REL", "RMS",
                "log10", "d<1.25", "d<1.25^2", "d<1.25^3");
  out += line;
  std::snprintf(line, sizeof(line), "%-8.3f %-8.3f %-8.3f %-10.3f %-10.3f %-10.3f\n",
                r.depth.rel, r.depth.rms, r.depth.log10, r.depth.delta1, r.depth.delta2,
                r.depth.delta3);
  out += line;
  out += "\n";
  std::snprintf(line, sizeof(line), "%-6s %-7s %-7s %-7s\n", "Thres", "Prec", "Recall", "F1");
  out += line;
  for (std::size_t t = 0; t < kEdgeThresholds.size(); ++t) {
    std::snprintf(line, sizeof(line), "%-6.2f %-7.3f %-7.3f %-7.3f\n", kEdgeThresholds[t],
                  r.edge[t].precision, r.edge[t].recall, r.edge[t].f1);
    out += line;
  }
  return out;
}

CameraIntrinsics CameraIntrinsics::synthetic(int height, int width) {
  return {static_cast<double>(width), static_cast<double>(width), (width - 1) / 2.0,
          (height - 1) / 2.0};
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("focal lengths must be positive");
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw ConfigError("principal point must be finite");
}

std::vector<CloudPoint> to_pointcloud(const DepthMap& depth, const CameraIntrinsics& intr,
                                      const FeatureMap* image) {
  intr.validate();
  FeatureMap colors;
  if (image != nullptr) {
    if (image->channels() != 3) throw ConfigError("point colors need a 3-channel image");
    colors = bilinear_resize(*image, depth.height(), depth.width());
  }
  std::vector<CloudPoint> points;
  for (int v = 0; v < depth.height(); ++v) {
    for (int u = 0; u < depth.width(); ++u) {
      const double d = depth.at(v, u);
      if (!(d > 0.0)) continue;
      CloudPoint p{(u - intr.cx) * d / intr.fx, (v - intr.cy) * d / intr.fy, d, std::nullopt};
      if (image != nullptr) p.color = std::array<double, 3>{colors(0, v, u), colors(1, v, u), colors(2, v, u)};
      points.push_back(p);
    }
  }
  return points;
}

std::string format_pointcloud(const std::vector<CloudPoint>& points) {
  std::string out;
  char line[160];
  for (const auto& p : points) {
    if (p.color) {
      std::snprintf(line, sizeof(line), "%.9g %.9g %.9g %.6g %.6g %.6g\n", p.x, p.y, p.z,
                    (*p.color)[0], (*p.color)[1], (*p.color)[2]);
    } else {
      std::snprintf(line, sizeof(line), "%.9g %.9g %.9g\n", p.x, p.y, p.z);
    }
    out += line;
  }
  return out;
}

}  // namespace sarpn
