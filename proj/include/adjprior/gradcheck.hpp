#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "adjprior/adjacency.hpp"
#include "adjprior/losses.hpp"
#include "adjprior/rng.hpp"
#include "adjprior/volume.hpp"

namespace adjprior {

// Finite-difference verification of every analytic gradient against the
// loss values alone. The reference side only ever evaluates the loss
// functions, never the gradient code.

inline constexpr std::uint64_t kGradCheckDefaultSeed = 20240614;
inline constexpr double kGradCheckStep = 1e-4;
inline constexpr double kGradCheckTolerance = 1e-5;

struct GradCheckResult {
  double seg_sum = 0.0;       // seg_loss gradient, sum combine mode
  double seg_product = 0.0;   // seg_loss gradient, product combine mode
  double nonadj = 0.0;        // nonadj_loss gradient
  double total_logits = 0.0;  // combined loss gradient through softmax

  double worst() const {
    return std::max(std::max(seg_sum, seg_product),
                    std::max(nonadj, total_logits));
  }
  bool pass(double tol = kGradCheckTolerance) const { return worst() < tol; }
};

namespace detail {

// Relative error with an absolute floor, so near-zero components compare
// on an absolute scale.
inline double rel_err(double analytic, double reference) {
  double denom = std::max({std::abs(analytic), std::abs(reference), 1e-6});
  return std::abs(analytic - reference) / denom;
}

template <typename Eval>
double central_difference(std::vector<double>& x, std::size_t k, double h,
                          Eval eval) {
  const double orig = x[k];
  x[k] = orig + h;
  const double fp = eval();
  x[k] = orig - h;
  const double fm = eval();
  x[k] = orig;
  return (fp - fm) / (2.0 * h);
}

// Max relative error of `analytic` against central differences of `eval`
// over every component of x.
template <typename Eval>
double max_grad_error(std::vector<double>& x, const std::vector<double>& analytic,
                      double h, Eval eval) {
  double worst = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    double fd = central_difference(x, k, h, eval);
    worst = std::max(worst, rel_err(analytic[k], fd));
  }
  return worst;
}

}  // namespace detail

// Runs all finite-difference suites over `instances` random instances with
// per-axis extents in [4, 8] and 3 to 5 classes. Deterministic in the seed.
inline GradCheckResult run_gradcheck(std::uint64_t seed = kGradCheckDefaultSeed,
                                     int instances = 20,
                                     double h = kGradCheckStep) {
  SplitMix64 rng(seed);
  GradCheckResult result;
  for (int inst = 0; inst < instances; ++inst) {
    const int nc = 3 + inst % 3;
    GridDims dims{static_cast<int>(4 + rng.uniform_int(5)),
                  static_cast<int>(4 + rng.uniform_int(5)),
                  static_cast<int>(4 + rng.uniform_int(5))};

    LabelMap gt(dims, Spacing{}, nc);
    for (auto& v : gt.voxels)
      v = static_cast<std::uint16_t>(rng.uniform_int(nc));
    const ProbMap target = one_hot(gt);

    LogitMap z(dims, Spacing{}, nc);
    for (auto& v : z.values) v = rng.uniform(-1.0, 1.0);
    ProbMap p = softmax(z);

    PriorAdj prior(nc, 3);
    for (int b = 0; b < nc; ++b)
      for (int c = b + 1; c < nc; ++c) {
        double a = static_cast<double>(rng.uniform_int(4)) / 3.0;
        prior.at(b, c) = a;
        prior.at(c, b) = a;
      }

    LossConfig sum_cfg;  // lambda 0.3, sum mode
    LossConfig prod_cfg;
    prod_cfg.combine_mode = CombineMode::product;

    {
      LogitMap analytic = seg_loss_grad(p, target, sum_cfg);
      double err = detail::max_grad_error(
          p.values, analytic.values, h,
          [&] { return seg_loss(p, target, sum_cfg); });
      result.seg_sum = std::max(result.seg_sum, err);
    }
    {
      LogitMap analytic = seg_loss_grad(p, target, prod_cfg);
      double err = detail::max_grad_error(
          p.values, analytic.values, h,
          [&] { return seg_loss(p, target, prod_cfg); });
      result.seg_product = std::max(result.seg_product, err);
    }
    {
      LogitMap analytic = nonadj_loss_grad(p, prior);
      double err = detail::max_grad_error(
          p.values, analytic.values, h, [&] { return nonadj_loss(p, prior); });
      result.nonadj = std::max(result.nonadj, err);
    }
    {
      LogitMap analytic = total_loss_grad_logits(z, target, prior, sum_cfg);
      double err = detail::max_grad_error(z.values, analytic.values, h, [&] {
        return total_loss(softmax(z), target, prior, sum_cfg);
      });
      result.total_logits = std::max(result.total_logits, err);
    }
  }
  return result;
}

}  // namespace adjprior
