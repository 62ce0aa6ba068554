#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "adjprior/adjacency.hpp"
#include "adjprior/errors.hpp"
#include "adjprior/volume.hpp"

namespace adjprior {

enum class CombineMode { sum, product };

struct LossConfig {
  double lambda = 0.3;     // weight of the non-adjacency penalty
  double dice_eps = 1e-5;  // dice smoothing, added to numerator and denominator
  double ce_eps = 1e-12;   // cross-entropy log clamp
  CombineMode combine_mode = CombineMode::sum;

  void validate() const {
    if (!(dice_eps > 0.0) || !(ce_eps > 0.0))
      throw validation_error("loss epsilons must be > 0");
    if (!std::isfinite(lambda) || lambda < 0.0)
      throw validation_error("lambda must be finite and >= 0");
  }
};

namespace detail {

// Per-channel overlap sums used by the dice loss and its gradient.
struct DiceSums {
  std::vector<double> pg;  // sum_i p_c(i) g_c(i)
  std::vector<double> pp;  // sum_i p_c(i)^2
  std::vector<double> gg;  // sum_i g_c(i)^2
};

inline DiceSums dice_sums(const ProbMap& p, const ProbMap& g) {
  const int nc = p.num_classes;
  DiceSums s{std::vector<double>(nc, 0.0), std::vector<double>(nc, 0.0),
             std::vector<double>(nc, 0.0)};
  const std::int64_t n = p.dims.voxel_count();
  for (std::int64_t i = 0; i < n; ++i) {
    const double* pi = p.values.data() + i * nc;
    const double* gi = g.values.data() + i * nc;
    for (int c = 0; c < nc; ++c) {
      s.pg[c] += pi[c] * gi[c];
      s.pp[c] += pi[c] * pi[c];
      s.gg[c] += gi[c] * gi[c];
    }
  }
  return s;
}

inline double clamped_log_arg(double p, double eps) {
  return std::min(std::max(p, eps), 1.0);
}

}  // namespace detail

// Smoothed soft dice loss averaged over all class channels:
//   1 - (1/C) sum_c (2 sum_i p g + eps) / (sum_i p^2 + sum_i g^2 + eps).
// A class absent from both volumes scores a perfect ratio of 1.
inline double soft_dice_loss(const ProbMap& p, const ProbMap& g,
                             const LossConfig& cfg = {}) {
  cfg.validate();
  require_same_shape(p.dims, p.num_classes, g.dims, g.num_classes);
  detail::DiceSums s = detail::dice_sums(p, g);
  const int nc = p.num_classes;
  double acc = 0.0;
  for (int c = 0; c < nc; ++c)
    acc += (2.0 * s.pg[c] + cfg.dice_eps) /
           (s.pp[c] + s.gg[c] + cfg.dice_eps);
  return 1.0 - acc / nc;
}

// Voxel-averaged cross-entropy against a one-hot target, with the log
// argument clamped to [ce_eps, 1].
inline double cross_entropy_loss(const ProbMap& p, const ProbMap& g,
                                 const LossConfig& cfg = {}) {
  cfg.validate();
  require_same_shape(p.dims, p.num_classes, g.dims, g.num_classes);
  const std::int64_t n = p.dims.voxel_count();
  const int nc = p.num_classes;
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double* pi = p.values.data() + i * nc;
    const double* gi = g.values.data() + i * nc;
    for (int c = 0; c < nc; ++c)
      if (gi[c] != 0.0)
        acc += gi[c] * std::log(detail::clamped_log_arg(pi[c], cfg.ce_eps));
  }
  return -acc / static_cast<double>(n);
}

inline double seg_loss(const ProbMap& p, const ProbMap& g,
                       const LossConfig& cfg = {}) {
  double dice = soft_dice_loss(p, g, cfg);
  double ce = cross_entropy_loss(p, g, cfg);
  return cfg.combine_mode == CombineMode::sum ? dice + ce : dice * ce;
}

// Gradient of soft_dice_loss with respect to p.
inline LogitMap soft_dice_grad(const ProbMap& p, const ProbMap& g,
                               const LossConfig& cfg = {}) {
  cfg.validate();
  require_same_shape(p.dims, p.num_classes, g.dims, g.num_classes);
  detail::DiceSums s = detail::dice_sums(p, g);
  const int nc = p.num_classes;
  std::vector<double> num(nc), den(nc);
  for (int c = 0; c < nc; ++c) {
    num[c] = 2.0 * s.pg[c] + cfg.dice_eps;
    den[c] = s.pp[c] + s.gg[c] + cfg.dice_eps;
  }
  LogitMap grad(p.dims, p.spacing, nc);
  const std::int64_t n = p.dims.voxel_count();
  for (std::int64_t i = 0; i < n; ++i) {
    const double* pi = p.values.data() + i * nc;
    const double* gi = g.values.data() + i * nc;
    double* out = grad.values.data() + i * nc;
    for (int c = 0; c < nc; ++c)
      out[c] = -(2.0 * gi[c] * den[c] - num[c] * 2.0 * pi[c]) /
               (den[c] * den[c] * nc);
  }
  return grad;
}

// Gradient of cross_entropy_loss with respect to p. Zero where the clamp
// is active (p below ce_eps or above 1).
inline LogitMap cross_entropy_grad(const ProbMap& p, const ProbMap& g,
                                   const LossConfig& cfg = {}) {
  cfg.validate();
  require_same_shape(p.dims, p.num_classes, g.dims, g.num_classes);
  LogitMap grad(p.dims, p.spacing, p.num_classes);
  const std::int64_t n = p.dims.voxel_count();
  const int nc = p.num_classes;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    const double* pi = p.values.data() + i * nc;
    const double* gi = g.values.data() + i * nc;
    double* out = grad.values.data() + i * nc;
    for (int c = 0; c < nc; ++c)
      out[c] = (gi[c] != 0.0 && pi[c] >= cfg.ce_eps && pi[c] <= 1.0)
                   ? -inv_n * gi[c] / pi[c]
                   : 0.0;
  }
  return grad;
}

inline LogitMap seg_loss_grad(const ProbMap& p, const ProbMap& g,
                              const LossConfig& cfg = {}) {
  LogitMap dg = soft_dice_grad(p, g, cfg);
  LogitMap cg = cross_entropy_grad(p, g, cfg);
  if (cfg.combine_mode == CombineMode::sum) {
    for (std::size_t k = 0; k < dg.values.size(); ++k)
      dg.values[k] += cg.values[k];
    return dg;
  }
  double dice = soft_dice_loss(p, g, cfg);
  double ce = cross_entropy_loss(p, g, cfg);
  for (std::size_t k = 0; k < dg.values.size(); ++k)
    dg.values[k] = ce * dg.values[k] + dice * cg.values[k];
  return dg;
}

// Individual terms of the combined objective. `nonadj` is the unweighted
// penalty value; `total` includes the lambda weighting.
struct LossTerms {
  double total = 0.0;
  double seg = 0.0;
  double dice = 0.0;
  double ce = 0.0;
  double nonadj = 0.0;
};

inline LossTerms total_loss_terms(const ProbMap& p, const ProbMap& g,
                                  const PriorAdj& prior,
                                  const LossConfig& cfg = {}) {
  cfg.validate();
  LossTerms t;
  t.dice = soft_dice_loss(p, g, cfg);
  t.ce = cross_entropy_loss(p, g, cfg);
  t.seg = cfg.combine_mode == CombineMode::sum ? t.dice + t.ce : t.dice * t.ce;
  t.nonadj = nonadj_loss(p, prior);
  t.total = t.seg + cfg.lambda * t.nonadj;
  return t;
}

inline double total_loss(const ProbMap& p, const ProbMap& g,
                         const PriorAdj& prior, const LossConfig& cfg = {}) {
  return total_loss_terms(p, g, prior, cfg).total;
}

// Gradient of the combined objective with respect to p.
inline LogitMap total_loss_grad(const ProbMap& p, const ProbMap& g,
                                const PriorAdj& prior,
                                const LossConfig& cfg = {}) {
  cfg.validate();
  if (p.num_classes != prior.num_classes)
    throw validation_error("num_classes mismatch between prediction and prior");
  LogitMap grad = seg_loss_grad(p, g, cfg);
  if (cfg.lambda != 0.0) {
    LogitMap ng = nonadj_loss_grad(p, prior);
    for (std::size_t k = 0; k < grad.values.size(); ++k)
      grad.values[k] += cfg.lambda * ng.values[k];
  }
  return grad;
}

// Gradient of the combined objective with respect to the logits, chained
// through the softmax Jacobian. Per voxel the components sum to zero.
inline LogitMap total_loss_grad_logits(const LogitMap& z, const ProbMap& g,
                                       const PriorAdj& prior,
                                       const LossConfig& cfg = {}) {
  ProbMap p = softmax(z);
  LogitMap dp = total_loss_grad(p, g, prior, cfg);
  LogitMap grad(z.dims, z.spacing, z.num_classes);
  const std::int64_t n = z.dims.voxel_count();
  const int nc = z.num_classes;
  for (std::int64_t i = 0; i < n; ++i) {
    const double* pi = p.values.data() + i * nc;
    const double* ui = dp.values.data() + i * nc;
    double* out = grad.values.data() + i * nc;
    double dot = 0.0;
    for (int c = 0; c < nc; ++c) dot += ui[c] * pi[c];
    for (int c = 0; c < nc; ++c) out[c] = pi[c] * (ui[c] - dot);
  }
  return grad;
}

}  // namespace adjprior
