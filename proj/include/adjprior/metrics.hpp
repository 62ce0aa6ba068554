#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "adjprior/errors.hpp"
#include "adjprior/volume.hpp"

namespace adjprior {

inline double label_volume_cm3(const LabelMap& lab, int label) {
  if (label < 0 || label >= lab.num_classes)
    throw validation_error("label out of range");
  std::int64_t count = 0;
  for (std::uint16_t v : lab.voxels) count += v == label;
  return static_cast<double>(count) * voxel_volume_mm3(lab.spacing) / 1000.0;
}

struct VolumetricError {
  double err_cm3 = 0.0;
  std::optional<double> err_pct;  // unset when the ground-truth volume is 0
};

inline VolumetricError volumetric_error(double v_gt, double v_pred) {
  if (v_gt < 0.0 || v_pred < 0.0)
    throw validation_error("volumes must be >= 0");
  VolumetricError e;
  e.err_cm3 = std::abs(v_gt - v_pred);
  if (v_gt > 0.0) e.err_pct = 100.0 * e.err_cm3 / v_gt;
  return e;
}

// Overlap 2|X n Y| / (|X| + |Y|) of the two binary masks of `label`.
// Unset when both masks are empty.
inline std::optional<double> dice_score(const LabelMap& gt,
                                        const LabelMap& pred, int label) {
  require_same_grid(gt.dims, pred.dims);
  if (label < 0 || label >= std::max(gt.num_classes, pred.num_classes))
    throw validation_error("label out of range");
  std::int64_t nx = 0, ny = 0, both = 0;
  const std::size_t n = gt.voxels.size();
  for (std::size_t i = 0; i < n; ++i) {
    bool a = gt.voxels[i] == label;
    bool b = pred.voxels[i] == label;
    nx += a;
    ny += b;
    both += a && b;
  }
  if (nx + ny == 0) return std::nullopt;
  return 2.0 * static_cast<double>(both) / static_cast<double>(nx + ny);
}

namespace detail {

// Boundary voxels of the mask: mask voxels with at least one 6-neighbor
// outside the mask, the volume border counting as outside. Returned as
// physical voxel-center coordinates.
inline std::vector<std::array<double, 3>> boundary_points(const LabelMap& lab,
                                                          int label) {
  std::vector<std::array<double, 3>> pts;
  const GridDims& g = lab.dims;
  auto inside = [&](int x, int y, int z) {
    return x >= 0 && x < g.h && y >= 0 && y < g.w && z >= 0 && z < g.d &&
           lab.at(x, y, z) == label;
  };
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y < g.w; ++y)
      for (int x = 0; x < g.h; ++x) {
        if (lab.at(x, y, z) != label) continue;
        bool boundary = !inside(x - 1, y, z) || !inside(x + 1, y, z) ||
                        !inside(x, y - 1, z) || !inside(x, y + 1, z) ||
                        !inside(x, y, z - 1) || !inside(x, y, z + 1);
        if (boundary)
          pts.push_back({x * lab.spacing.sx, y * lab.spacing.sy,
                         z * lab.spacing.sz});
      }
  return pts;
}

// Nearest-rank 95th percentile of the directed nearest-neighbor distances
// from every point of `from` to the set `to`.
inline double directed_p95(const std::vector<std::array<double, 3>>& from,
                           const std::vector<std::array<double, 3>>& to) {
  std::vector<double> dists;
  dists.reserve(from.size());
  for (const auto& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : to) {
      double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    dists.push_back(std::sqrt(best));
  }
  std::sort(dists.begin(), dists.end());
  std::size_t rank = static_cast<std::size_t>(
      std::ceil(0.95 * static_cast<double>(dists.size())));
  rank = std::max<std::size_t>(rank, 1);
  return dists[rank - 1];
}

}  // namespace detail

// 95th-percentile symmetric surface distance in millimeters: the maximum
// of the two directed nearest-rank 95th percentiles over boundary points.
// Unset when either mask is empty.
inline std::optional<double> hd95_mm(const LabelMap& gt, const LabelMap& pred,
                                     int label) {
  require_same_grid(gt.dims, pred.dims);
  if (!(gt.spacing == pred.spacing))
    throw validation_error("spacing mismatch");
  if (label < 0 || label >= std::max(gt.num_classes, pred.num_classes))
    throw validation_error("label out of range");
  auto a = detail::boundary_points(gt, label);
  auto b = detail::boundary_points(pred, label);
  if (a.empty() || b.empty()) return std::nullopt;
  return std::max(detail::directed_p95(a, b), detail::directed_p95(b, a));
}

struct LabelMetrics {
  int label = 0;
  std::string name;
  double vol_gt_cm3 = 0.0;
  double vol_pred_cm3 = 0.0;
  double err_cm3 = 0.0;
  std::optional<double> err_pct;
  std::optional<double> dsc;
  std::optional<double> hd95_mm;
};

struct MetricReport {
  GridDims dims;
  Spacing spacing;
  int num_classes = 0;
  std::vector<LabelMetrics> labels;  // one entry per foreground label 1..C
};

// Per-foreground-label volumes, volumetric errors, dice and HD95.
inline MetricReport evaluate(const LabelMap& gt, const LabelMap& pred) {
  require_same_grid(gt.dims, pred.dims);
  if (!(gt.spacing == pred.spacing))
    throw validation_error("spacing mismatch");
  if (gt.num_classes != pred.num_classes)
    throw validation_error("num_classes mismatch");
  MetricReport report{gt.dims, gt.spacing, gt.num_classes, {}};
  for (int label = 1; label < gt.num_classes; ++label) {
    LabelMetrics m;
    m.label = label;
    m.vol_gt_cm3 = label_volume_cm3(gt, label);
    m.vol_pred_cm3 = label_volume_cm3(pred, label);
    VolumetricError e = volumetric_error(m.vol_gt_cm3, m.vol_pred_cm3);
    m.err_cm3 = e.err_cm3;
    m.err_pct = e.err_pct;
    m.dsc = dice_score(gt, pred, label);
    m.hd95_mm = hd95_mm(gt, pred, label);
    report.labels.push_back(std::move(m));
  }
  return report;
}

}  // namespace adjprior
