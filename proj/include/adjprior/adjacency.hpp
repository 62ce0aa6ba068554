#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "adjprior/errors.hpp"
#include "adjprior/volume.hpp"

namespace adjprior {

// All adjacency matrices are (num_classes x num_classes), row-major,
// symmetric with a zero diagonal. Entry (b, c) refers to the unordered
// label pair {b, c}; both symmetric slots always hold the same value.

// Neighbor-pair counts from a hard labelmap, or soft (probability-weighted)
// counts from a probabilistic prediction.
struct AdjCounts {
  int num_classes = 0;
  std::vector<double> m;

  AdjCounts() = default;
  explicit AdjCounts(int classes)
      : num_classes(classes),
        m(static_cast<std::size_t>(classes) * classes, 0.0) {}

  double at(int b, int c) const {
    return m[static_cast<std::size_t>(b) * num_classes + c];
  }
  double& at(int b, int c) {
    return m[static_cast<std::size_t>(b) * num_classes + c];
  }
};

// 0/1 per-subject adjacency.
struct BinaryAdj {
  int num_classes = 0;
  std::vector<std::uint8_t> m;

  BinaryAdj() = default;
  explicit BinaryAdj(int classes)
      : num_classes(classes),
        m(static_cast<std::size_t>(classes) * classes, 0) {}

  std::uint8_t at(int b, int c) const {
    return m[static_cast<std::size_t>(b) * num_classes + c];
  }
  std::uint8_t& at(int b, int c) {
    return m[static_cast<std::size_t>(b) * num_classes + c];
  }
};

// Cross-subject adjacency frequencies in [0, 1]. Entry 0 marks a label pair
// never seen in contact, entry 1 a pair in contact in every subject.
struct PriorAdj {
  int num_classes = 0;
  int num_subjects = 0;
  std::vector<double> m;

  PriorAdj() = default;
  PriorAdj(int classes, int subjects)
      : num_classes(classes),
        num_subjects(subjects),
        m(static_cast<std::size_t>(classes) * classes, 0.0) {}

  double at(int b, int c) const {
    return m[static_cast<std::size_t>(b) * num_classes + c];
  }
  double& at(int b, int c) {
    return m[static_cast<std::size_t>(b) * num_classes + c];
  }
};

// Total number of unordered axis-neighbor voxel pairs in a grid. Soft
// counts are divided by this so the loss scale does not grow with the
// volume; clamped to 1 for degenerate single-voxel grids.
inline double pair_normalizer(const GridDims& g) {
  double z = static_cast<double>(g.h - 1) * g.w * g.d +
             static_cast<double>(g.h) * (g.w - 1) * g.d +
             static_cast<double>(g.h) * g.w * (g.d - 1);
  return std::max(z, 1.0);
}

// Counts axis-neighbor voxel pairs carrying two different labels. Three
// forward-difference passes (x, y, z) visit each unordered pair exactly
// once; a pair with labels b != c increments both (b,c) and (c,b).
inline AdjCounts hard_adjacency(const LabelMap& lab) {
  AdjCounts a(lab.num_classes);
  const GridDims& g = lab.dims;
  const std::int64_t sy = g.h;
  const std::int64_t sz = static_cast<std::int64_t>(g.h) * g.w;
  const std::uint16_t* v = lab.voxels.data();
  auto count_pair = [&](std::int64_t i, std::int64_t j) {
    int b = v[i], c = v[j];
    if (b != c) {
      a.at(b, c) += 1.0;
      a.at(c, b) += 1.0;
    }
  };
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y < g.w; ++y) {
      std::int64_t row = voxel_index(g, 0, y, z);
      for (int x = 0; x + 1 < g.h; ++x) count_pair(row + x, row + x + 1);
    }
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y + 1 < g.w; ++y) {
      std::int64_t row = voxel_index(g, 0, y, z);
      for (int x = 0; x < g.h; ++x) count_pair(row + x, row + x + sy);
    }
  for (int z = 0; z + 1 < g.d; ++z)
    for (int y = 0; y < g.w; ++y) {
      std::int64_t row = voxel_index(g, 0, y, z);
      for (int x = 0; x < g.h; ++x) count_pair(row + x, row + x + sz);
    }
  return a;
}

inline BinaryAdj binarize(const AdjCounts& a) {
  BinaryAdj b(a.num_classes);
  for (std::size_t i = 0; i < a.m.size(); ++i) b.m[i] = a.m[i] > 0.0 ? 1 : 0;
  return b;
}

// Empirical adjacency frequencies: the per-subject binary matrices summed
// and divided by the number of subjects.
inline PriorAdj aggregate_prior(const std::vector<BinaryAdj>& mats) {
  if (mats.empty()) throw validation_error("no subjects");
  const int nc = mats.front().num_classes;
  for (const BinaryAdj& b : mats)
    if (b.num_classes != nc)
      throw validation_error("num_classes mismatch across subjects");
  PriorAdj prior(nc, static_cast<int>(mats.size()));
  for (const BinaryAdj& b : mats)
    for (std::size_t i = 0; i < prior.m.size(); ++i) prior.m[i] += b.m[i];
  const double inv = 1.0 / static_cast<double>(mats.size());
  for (double& v : prior.m) v *= inv;
  return prior;
}

// Differentiable relaxation of hard_adjacency. Each unordered axis-neighbor
// pair (i, j) adds p_b(i)p_c(j) + p_c(i)p_b(j) to both slots of every label
// pair b != c; all entries are then divided by pair_normalizer(dims). On a
// one-hot input this equals hard_adjacency / pair_normalizer.
inline AdjCounts soft_adjacency(const ProbMap& p) {
  AdjCounts s(p.num_classes);
  const GridDims& g = p.dims;
  const int nc = p.num_classes;
  const std::int64_t sy = g.h;
  const std::int64_t sz = static_cast<std::int64_t>(g.h) * g.w;
  const double* v = p.values.data();
  auto add_pair = [&](std::int64_t i, std::int64_t j) {
    const double* pi = v + i * nc;
    const double* pj = v + j * nc;
    for (int b = 0; b < nc; ++b)
      for (int c = 0; c < nc; ++c)
        if (b != c) s.at(b, c) += pi[b] * pj[c] + pi[c] * pj[b];
  };
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y < g.w; ++y) {
      std::int64_t row = voxel_index(g, 0, y, z);
      for (int x = 0; x + 1 < g.h; ++x) add_pair(row + x, row + x + 1);
    }
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y + 1 < g.w; ++y) {
      std::int64_t row = voxel_index(g, 0, y, z);
      for (int x = 0; x < g.h; ++x) add_pair(row + x, row + x + sy);
    }
  for (int z = 0; z + 1 < g.d; ++z)
    for (int y = 0; y < g.w; ++y) {
      std::int64_t row = voxel_index(g, 0, y, z);
      for (int x = 0; x < g.h; ++x) add_pair(row + x, row + x + sz);
    }
  const double z_norm = pair_normalizer(g);
  for (double& e : s.m) e /= z_norm;
  return s;
}

// Penalty on soft contacts over label pairs the prior marks as unlikely:
// sum over unordered pairs b < c of (1 - A_bc) * s_bc. Zero exactly when
// every soft contact lies on pairs with A = 1.
inline double nonadj_loss(const ProbMap& p, const PriorAdj& prior) {
  if (p.num_classes != prior.num_classes)
    throw validation_error("num_classes mismatch between prediction and prior");
  AdjCounts s = soft_adjacency(p);
  double loss = 0.0;
  for (int b = 0; b < p.num_classes; ++b)
    for (int c = b + 1; c < p.num_classes; ++c)
      loss += (1.0 - prior.at(b, c)) * s.at(b, c);
  return loss;
}

// Analytic gradient of nonadj_loss with respect to the probabilities:
// dL/dp_b(i) = (1/Z) * sum_{c != b} (1 - A_bc) * sum_{j in N6(i)} p_c(j).
inline LogitMap nonadj_loss_grad(const ProbMap& p, const PriorAdj& prior) {
  if (p.num_classes != prior.num_classes)
    throw validation_error("num_classes mismatch between prediction and prior");
  const GridDims& g = p.dims;
  const int nc = p.num_classes;
  const std::int64_t n = g.voxel_count();
  const std::int64_t sy = g.h;
  const std::int64_t sz = static_cast<std::int64_t>(g.h) * g.w;

  // Neighbor sums S_c(i) = sum of p_c over the 6-neighborhood of i.
  std::vector<double> nbr(static_cast<std::size_t>(n) * nc, 0.0);
  const double* v = p.values.data();
  auto accumulate = [&](std::int64_t i, std::int64_t j) {
    const double* pi = v + i * nc;
    const double* pj = v + j * nc;
    double* ni = nbr.data() + i * nc;
    double* nj = nbr.data() + j * nc;
    for (int c = 0; c < nc; ++c) {
      ni[c] += pj[c];
      nj[c] += pi[c];
    }
  };
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y < g.w; ++y) {
      std::int64_t row = voxel_index(g, 0, y, z);
      for (int x = 0; x + 1 < g.h; ++x) accumulate(row + x, row + x + 1);
    }
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y + 1 < g.w; ++y) {
      std::int64_t row = voxel_index(g, 0, y, z);
      for (int x = 0; x < g.h; ++x) accumulate(row + x, row + x + sy);
    }
  for (int z = 0; z + 1 < g.d; ++z)
    for (int y = 0; y < g.w; ++y) {
      std::int64_t row = voxel_index(g, 0, y, z);
      for (int x = 0; x < g.h; ++x) accumulate(row + x, row + x + sz);
    }

  // Weight matrix (1 - A) off the diagonal, 0 on it.
  std::vector<double> weight(static_cast<std::size_t>(nc) * nc, 0.0);
  for (int b = 0; b < nc; ++b)
    for (int c = 0; c < nc; ++c)
      if (b != c)
        weight[static_cast<std::size_t>(b) * nc + c] = 1.0 - prior.at(b, c);

  LogitMap grad(g, p.spacing, nc);
  const double z_norm = pair_normalizer(g);
  for (std::int64_t i = 0; i < n; ++i) {
    const double* ni = nbr.data() + i * nc;
    double* gi = grad.values.data() + i * nc;
    for (int b = 0; b < nc; ++b) {
      const double* wb = weight.data() + static_cast<std::size_t>(b) * nc;
      double acc = 0.0;
      for (int c = 0; c < nc; ++c) acc += wb[c] * ni[c];
      gi[b] = acc / z_norm;
    }
  }
  return grad;
}

// One observed contact between labels the prior disallows at the given
// threshold.
struct Violation {
  int label_b = 0;
  int label_c = 0;
  std::int64_t contact_pairs = 0;

  bool operator==(const Violation&) const = default;
};

// Lists unordered label pairs with hard contact in `lab` but prior value
// <= threshold, sorted by descending contact count (ties by ascending
// label pair).
inline std::vector<Violation> violation_report(const LabelMap& lab,
                                               const PriorAdj& prior,
                                               double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw validation_error("threshold must lie in [0, 1]");
  if (lab.num_classes != prior.num_classes)
    throw validation_error("num_classes mismatch between labelmap and prior");
  AdjCounts a = hard_adjacency(lab);
  std::vector<Violation> out;
  for (int b = 0; b < lab.num_classes; ++b)
    for (int c = b + 1; c < lab.num_classes; ++c)
      if (a.at(b, c) > 0.0 && prior.at(b, c) <= threshold)
        out.push_back({b, c, std::llround(a.at(b, c))});
  std::sort(out.begin(), out.end(), [](const Violation& l, const Violation& r) {
    if (l.contact_pairs != r.contact_pairs)
      return l.contact_pairs > r.contact_pairs;
    if (l.label_b != r.label_b) return l.label_b < r.label_b;
    return l.label_c < r.label_c;
  });
  return out;
}

}  // namespace adjprior
