#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sarpn/feature_map.hpp"

namespace sarpn {

struct DepthMetrics {
  double rel = 0.0;
  double rms = 0.0;
  double log10 = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
};

struct EdgeScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline constexpr std::array<double, 3> kEdgeThresholds{0.25, 0.5, 1.0};

struct MetricReport {
  DepthMetrics depth;
  std::array<EdgeScores, 3> edge;  // one per kEdgeThresholds entry
  std::size_t samples = 0;
};

/// Metrics over pixels with gt > 0. A prediction of a different size is
/// bilinearly resized to the ground truth first; predictions are clamped to
/// at least `epsilon_depth` before every term. Empty valid set is a
/// DataError.
DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt,
                           double epsilon_depth = 1e-3);

/// 3x3 Sobel gradient magnitude (replicate border), scaled so that a unit
/// ramp has magnitude 1 (meters per pixel).
DepthMap sobel_magnitude(const DepthMap& depth);

/// Edge pixels are those with Sobel magnitude > threshold, evaluated where
/// the whole 3x3 ground-truth neighbourhood is valid.
EdgeScores edge_metrics(const DepthMap& pred, const DepthMap& gt, double threshold);

/// Accumulates unweighted per-sample means.
class MetricAccumulator {
 public:
  void add(const DepthMap& pred, const DepthMap& gt, double epsilon_depth = 1e-3);
  MetricReport report() const;
  std::size_t count() const noexcept { return n_; }

 private:
  MetricReport sum_;
  std::size_t n_ = 0;
};

/// Flat key=value text, one metric per line, Table 1 then Table 2 order.
std::string format_report(const MetricReport& report);
/// Aligned two-table rendering of the same report.
std::string format_report_table(const MetricReport& report);
std::vector<std::string> report_keys();

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  /// fx = fy = width, principal point at the image center.
  static CameraIntrinsics synthetic(int height, int width);
  void validate() const;
};

struct CloudPoint {
  double x, y, z;
  std::optional<std::array<double, 3>> color;
};

/// Back-projects every pixel with depth > 0 through a pinhole camera. Colors
/// are sampled from `image` (same size as `depth`, or resized to it).
std::vector<CloudPoint> to_pointcloud(const DepthMap& depth, const CameraIntrinsics& intr,
                                      const FeatureMap* image = nullptr);
/// ASCII "x y z [r g b]" per line.
std::string format_pointcloud(const std::vector<CloudPoint>& points);

}  // namespace sarpn
