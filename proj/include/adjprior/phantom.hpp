#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adjprior/adjacency.hpp"
#include "adjprior/errors.hpp"
#include "adjprior/losses.hpp"
#include "adjprior/rng.hpp"
#include "adjprior/volume.hpp"

namespace adjprior {

// Synthetic multi-label volume: num_classes - 1 ellipsoidal structures
// chained along the x axis. Consecutive structures overlap (the later
// label keeps the shared cap), non-consecutive structures are separated
// by background, so the chain has label pairs that are never adjacent.
struct PhantomSpec {
  std::uint64_t seed = 42;
  GridDims dims{48, 48, 48};
  int num_classes = 5;      // background + num_classes - 1 structures
  double noise_sigma = 1.5; // stddev of the additive logit noise
  double logit_gain = 2.0;  // scale of the one-hot logits

  void validate() const {
    validate_dims(dims);
    if (dims.h < 8 || dims.w < 8 || dims.d < 8)
      throw validation_error("phantom dims must be >= 8 per axis");
    if (num_classes < 3)
      throw validation_error("phantom needs num_classes >= 3");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
      throw validation_error("noise_sigma must be finite and >= 0");
    if (!std::isfinite(logit_gain))
      throw validation_error("logit_gain must be finite");
  }
};

// Deterministic in the seed: structure shapes are jittered from the seeded
// stream, then noisy logits are logit_gain * one_hot(gt) plus Gaussian
// noise drawn in storage order. The adjacency topology of the ground truth
// (which label pairs touch) does not depend on the seed.
inline std::pair<LabelMap, LogitMap> generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  SplitMix64 rng(spec.seed);
  const GridDims& g = spec.dims;
  const int structures = spec.num_classes - 1;

  struct Ellipsoid {
    double cx, cy, cz, ax, by, bz;
  };
  std::vector<Ellipsoid> shapes;
  const double delta = static_cast<double>(g.h) / structures;
  // Half the center distance plus a capped absolute margin: consecutive
  // ellipsoids overlap by a multi-voxel lens while structures two apart
  // stay separated by background.
  const double ax = 0.5 * delta + std::min(1.5, 0.2 * delta);
  for (int k = 1; k <= structures; ++k) {
    double jy = rng.uniform(-1.0, 1.0);
    double jz = rng.uniform(-1.0, 1.0);
    double ry = rng.uniform(0.85, 1.15);
    double rz = rng.uniform(0.85, 1.15);
    Ellipsoid e;
    e.cx = (k - 0.5) * delta;
    e.cy = 0.5 * (g.w - 1) + jy;
    e.cz = 0.5 * (g.d - 1) + jz;
    e.ax = ax;
    e.by = std::max(1.5, 0.27 * g.w * ry);
    e.bz = std::max(1.5, 0.27 * g.d * rz);
    shapes.push_back(e);
  }

  LabelMap gt(g, Spacing{}, spec.num_classes);
  for (int z = 0; z < g.d; ++z)
    for (int y = 0; y < g.w; ++y)
      for (int x = 0; x < g.h; ++x) {
        int label = 0;
        for (int k = 0; k < structures; ++k) {
          const Ellipsoid& e = shapes[static_cast<std::size_t>(k)];
          double u = (x - e.cx) / e.ax;
          double v = (y - e.cy) / e.by;
          double t = (z - e.cz) / e.bz;
          if (u * u + v * v + t * t <= 1.0) label = k + 1;
        }
        gt.at(x, y, z) = static_cast<std::uint16_t>(label);
      }

  LogitMap noisy(g, Spacing{}, spec.num_classes);
  const std::int64_t n = g.voxel_count();
  for (std::int64_t i = 0; i < n; ++i) {
    int truth = gt.voxels[static_cast<std::size_t>(i)];
    for (int c = 0; c < spec.num_classes; ++c)
      noisy.value(i, c) = (c == truth ? spec.logit_gain : 0.0) +
                          rng.normal(spec.noise_sigma);
  }
  return {std::move(gt), std::move(noisy)};
}

// Two-phase schedule for direct logit optimization: phase 1 descends the
// segmentation loss alone, phase 2 the combined loss with the configured
// lambda.
struct RefineConfig {
  int phase1_steps = 200;
  int phase2_steps = 300;
  // Step size applied to the gradient of the volume-summed objective
  // (total loss times voxel count), so steps do not shrink with grid size.
  double learning_rate = 0.05;
  LossConfig loss;

  void validate() const {
    loss.validate();
    if (phase1_steps < 0 || phase2_steps < 0)
      throw validation_error("step counts must be >= 0");
    if (phase1_steps + phase2_steps == 0)
      throw validation_error("at least one phase must have steps");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw validation_error("learning_rate must be finite and > 0");
  }
};

// One trace entry per performed step, evaluated at the pre-update iterate.
// `nonadj` is the unweighted penalty value; phase-1 rows record 0 there
// because the penalty is not part of the phase-1 objective.
struct TraceRow {
  int step = 0;   // 1-based global step index
  int phase = 0;  // 1 or 2
  double total = 0.0;
  double seg = 0.0;
  double dice = 0.0;
  double ce = 0.0;
  double nonadj = 0.0;
};

struct RefineResult {
  ProbMap prob;
  std::vector<TraceRow> trace;
};

// Plain fixed-step gradient descent on the logits. The per-step gradient
// is total_loss_grad_logits scaled by the voxel count (see RefineConfig).
inline RefineResult refine(const LogitMap& z0, const LabelMap& gt,
                           const PriorAdj& prior, const RefineConfig& cfg) {
  cfg.validate();
  require_same_shape(z0.dims, z0.num_classes, gt.dims, gt.num_classes);
  if (z0.num_classes != prior.num_classes)
    throw validation_error("num_classes mismatch between logits and prior");

  const ProbMap target = one_hot(gt);
  LogitMap z = z0;
  const std::int64_t n = z.dims.voxel_count();
  const double scale = cfg.learning_rate * static_cast<double>(n);
  const int total_steps = cfg.phase1_steps + cfg.phase2_steps;

  std::vector<TraceRow> trace;
  trace.reserve(static_cast<std::size_t>(total_steps));
  for (int step = 1; step <= total_steps; ++step) {
    const int phase = step <= cfg.phase1_steps ? 1 : 2;
    LossConfig eff = cfg.loss;
    if (phase == 1) eff.lambda = 0.0;

    ProbMap p = softmax(z);
    TraceRow row;
    row.step = step;
    row.phase = phase;
    row.dice = soft_dice_loss(p, target, eff);
    row.ce = cross_entropy_loss(p, target, eff);
    row.seg = eff.combine_mode == CombineMode::sum ? row.dice + row.ce
                                                   : row.dice * row.ce;
    if (phase == 2) {
      row.nonadj = nonadj_loss(p, prior);
      row.total = row.seg + eff.lambda * row.nonadj;
    } else {
      row.total = row.seg;
    }
    if (!std::isfinite(row.total))
      throw error("non-finite loss at step " + std::to_string(step));
    trace.push_back(row);

    LogitMap grad = total_loss_grad_logits(z, target, prior, eff);
    for (std::size_t k = 0; k < z.values.size(); ++k)
      z.values[k] -= scale * grad.values[k];
  }
  return {softmax(z), std::move(trace)};
}

}  // namespace adjprior
