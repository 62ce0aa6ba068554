#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "adjprior/errors.hpp"

namespace adjprior {

// Grid extents in voxels, axes (x, y, z) with extents (h, w, d).
// Storage order is x-fastest, then y, then z.
struct GridDims {
  int h = 0;
  int w = 0;
  int d = 0;

  std::int64_t voxel_count() const {
    return static_cast<std::int64_t>(h) * w * d;
  }
  bool operator==(const GridDims&) const = default;
};

inline void validate_dims(const GridDims& g) {
  if (g.h < 1 || g.w < 1 || g.d < 1)
    throw validation_error("grid dims must be >= 1 per axis");
}

// Physical voxel size in millimeters per axis.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;
  bool operator==(const Spacing&) const = default;
};

inline void validate_spacing(const Spacing& s) {
  for (double v : {s.sx, s.sy, s.sz})
    if (!(v > 0.0) || !std::isfinite(v))
      throw validation_error("spacing components must be finite and > 0");
}

inline double voxel_volume_mm3(const Spacing& s) {
  validate_spacing(s);
  return s.sx * s.sy * s.sz;
}

// Linear index of voxel (x, y, z).
inline std::int64_t voxel_index(const GridDims& g, int x, int y, int z) {
  return static_cast<std::int64_t>(z) * g.w * g.h +
         static_cast<std::int64_t>(y) * g.h + x;
}

// One integer class label per voxel, 0 = background.
struct LabelMap {
  GridDims dims;
  Spacing spacing;
  int num_classes = 0;
  std::vector<std::uint16_t> voxels;  // size dims.voxel_count()

  LabelMap() = default;

  LabelMap(GridDims d, Spacing s, int classes)
      : dims(d),
        spacing(s),
        num_classes(classes),
        voxels(static_cast<std::size_t>(d.voxel_count()), 0) {
    validate();
  }

  LabelMap(GridDims d, Spacing s, int classes, std::vector<std::uint16_t> v)
      : dims(d), spacing(s), num_classes(classes), voxels(std::move(v)) {
    validate();
  }

  void validate() const {
    validate_dims(dims);
    validate_spacing(spacing);
    if (num_classes < 1) throw validation_error("num_classes must be >= 1");
    if (static_cast<std::int64_t>(voxels.size()) != dims.voxel_count())
      throw validation_error("label payload size does not match dims");
    for (std::uint16_t v : voxels)
      if (v >= num_classes)
        throw validation_error("label value outside [0, num_classes)");
  }

  std::uint16_t at(int x, int y, int z) const {
    return voxels[static_cast<std::size_t>(voxel_index(dims, x, y, z))];
  }
  std::uint16_t& at(int x, int y, int z) {
    return voxels[static_cast<std::size_t>(voxel_index(dims, x, y, z))];
  }

  bool operator==(const LabelMap&) const = default;
};

// Per-voxel class probability vectors, class index fastest.
struct ProbMap {
  GridDims dims;
  Spacing spacing;
  int num_classes = 0;
  std::vector<double> values;  // size voxel_count * num_classes

  ProbMap() = default;

  ProbMap(GridDims d, Spacing s, int classes)
      : dims(d),
        spacing(s),
        num_classes(classes),
        values(static_cast<std::size_t>(d.voxel_count()) * classes, 0.0) {
    validate_dims(dims);
    validate_spacing(spacing);
    if (num_classes < 1) throw validation_error("num_classes must be >= 1");
  }

  // Full invariant check: entries in [0,1], per-voxel sums within tol of 1.
  void validate(double sum_tol = 1e-6) const {
    validate_dims(dims);
    validate_spacing(spacing);
    if (num_classes < 1) throw validation_error("num_classes must be >= 1");
    if (static_cast<std::int64_t>(values.size()) !=
        dims.voxel_count() * num_classes)
      throw validation_error("probability payload size does not match dims");
    const std::int64_t n = dims.voxel_count();
    for (std::int64_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (int c = 0; c < num_classes; ++c) {
        double p = values[static_cast<std::size_t>(i * num_classes + c)];
        if (!(p >= 0.0 && p <= 1.0))
          throw validation_error("probability entry outside [0, 1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > sum_tol)
        throw validation_error("per-voxel probabilities do not sum to 1");
    }
  }

  double value(std::int64_t voxel, int c) const {
    return values[static_cast<std::size_t>(voxel * num_classes + c)];
  }
  double& value(std::int64_t voxel, int c) {
    return values[static_cast<std::size_t>(voxel * num_classes + c)];
  }

  bool operator==(const ProbMap&) const = default;
};

// Per-voxel unconstrained real score vectors, class index fastest.
// Also used as the container for per-voxel per-class gradient volumes.
struct LogitMap {
  GridDims dims;
  Spacing spacing;
  int num_classes = 0;
  std::vector<double> values;

  LogitMap() = default;

  LogitMap(GridDims d, Spacing s, int classes)
      : dims(d),
        spacing(s),
        num_classes(classes),
        values(static_cast<std::size_t>(d.voxel_count()) * classes, 0.0) {
    validate_dims(dims);
    validate_spacing(spacing);
    if (num_classes < 1) throw validation_error("num_classes must be >= 1");
  }

  void validate() const {
    validate_dims(dims);
    validate_spacing(spacing);
    if (num_classes < 1) throw validation_error("num_classes must be >= 1");
    if (static_cast<std::int64_t>(values.size()) !=
        dims.voxel_count() * num_classes)
      throw validation_error("logit payload size does not match dims");
    for (double v : values)
      if (!std::isfinite(v)) throw validation_error("logit value not finite");
  }

  double value(std::int64_t voxel, int c) const {
    return values[static_cast<std::size_t>(voxel * num_classes + c)];
  }
  double& value(std::int64_t voxel, int c) {
    return values[static_cast<std::size_t>(voxel * num_classes + c)];
  }

  bool operator==(const LogitMap&) const = default;
};

inline void require_same_grid(const GridDims& a, const GridDims& b) {
  if (!(a == b)) throw validation_error("grid dims mismatch");
}

inline void require_same_shape(const GridDims& da, int ca, const GridDims& db,
                               int cb) {
  require_same_grid(da, db);
  if (ca != cb) throw validation_error("num_classes mismatch");
}

// Indicator encoding of a labelmap; output entries are exact 0/1.
inline ProbMap one_hot(const LabelMap& lab) {
  ProbMap p(lab.dims, lab.spacing, lab.num_classes);
  const std::int64_t n = lab.dims.voxel_count();
  for (std::int64_t i = 0; i < n; ++i)
    p.value(i, lab.voxels[static_cast<std::size_t>(i)]) = 1.0;
  return p;
}

// Hard decision per voxel; ties break to the lowest class index.
inline LabelMap argmax_labels(const ProbMap& p) {
  LabelMap lab(p.dims, p.spacing, p.num_classes);
  const std::int64_t n = p.dims.voxel_count();
  for (std::int64_t i = 0; i < n; ++i) {
    int best = 0;
    double best_v = p.value(i, 0);
    for (int c = 1; c < p.num_classes; ++c) {
      double v = p.value(i, c);
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    lab.voxels[static_cast<std::size_t>(i)] = static_cast<std::uint16_t>(best);
  }
  return lab;
}

// Per-voxel softmax, stabilized by subtracting the per-voxel maximum.
inline ProbMap softmax(const LogitMap& z) {
  ProbMap p(z.dims, z.spacing, z.num_classes);
  const std::int64_t n = z.dims.voxel_count();
  const int nc = z.num_classes;
  for (std::int64_t i = 0; i < n; ++i) {
    double m = z.value(i, 0);
    for (int c = 1; c < nc; ++c) m = std::max(m, z.value(i, c));
    double sum = 0.0;
    for (int c = 0; c < nc; ++c) {
      double e = std::exp(z.value(i, c) - m);
      p.value(i, c) = e;
      sum += e;
    }
    for (int c = 0; c < nc; ++c) p.value(i, c) /= sum;
  }
  return p;
}

}  // namespace adjprior
