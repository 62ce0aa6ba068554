#include <catch2/catch_amalgamated.hpp>

#include "adjprior/phantom.hpp"
#include "oracles.hpp"

using namespace adjprior;

namespace {

PriorAdj prior_of(const LabelMap& lab) {
  return aggregate_prior({binarize(hard_adjacency(lab))});
}

}  // namespace

TEST_CASE("generate_phantom is deterministic in the seed") {
  PhantomSpec spec;
  spec.dims = {16, 16, 16};
  auto [gt1, z1] = generate_phantom(spec);
  auto [gt2, z2] = generate_phantom(spec);
  CHECK(gt1.voxels == gt2.voxels);
  CHECK(z1.values == z2.values);

  spec.seed = 43;
  auto [gt3, z3] = generate_phantom(spec);
  CHECK(z3.values != z1.values);
}

TEST_CASE("noise-free phantom logits decode to the ground truth") {
  PhantomSpec spec;
  spec.dims = {12, 12, 12};
  spec.noise_sigma = 0.0;
  auto [gt, z] = generate_phantom(spec);
  CHECK(argmax_labels(softmax(z)) == gt);
}

TEST_CASE("phantom chain has forbidden foreground pairs") {
  PhantomSpec spec;  // default 48^3, 5 classes
  auto [gt, z] = generate_phantom(spec);
  AdjCounts a = hard_adjacency(gt);

  // Consecutive structures and background contacts exist.
  for (int k = 1; k < 5; ++k) CHECK(a.at(0, k) > 0.0);
  CHECK(a.at(1, 2) > 0.0);
  CHECK(a.at(2, 3) > 0.0);
  CHECK(a.at(3, 4) > 0.0);

  // Non-consecutive structures never touch.
  CHECK(a.at(1, 3) == 0.0);
  CHECK(a.at(1, 4) == 0.0);
  CHECK(a.at(2, 4) == 0.0);
}

TEST_CASE("phantom adjacency topology is seed independent") {
  PhantomSpec spec;
  spec.dims = {32, 32, 32};
  auto first = binarize(hard_adjacency(generate_phantom(spec).first));
  for (std::uint64_t seed : {7ull, 99ull, 123456789ull}) {
    spec.seed = seed;
    auto other = binarize(hard_adjacency(generate_phantom(spec).first));
    CHECK(other.m == first.m);
  }
}

TEST_CASE("phantom spec invariants") {
  PhantomSpec spec;
  spec.num_classes = 2;
  CHECK_THROWS_AS(generate_phantom(spec), validation_error);
  spec = PhantomSpec{};
  spec.dims = {7, 12, 12};
  CHECK_THROWS_AS(generate_phantom(spec), validation_error);
  spec = PhantomSpec{};
  spec.noise_sigma = -1.0;
  CHECK_THROWS_AS(generate_phantom(spec), validation_error);
}

TEST_CASE("refine descends and traces both phases") {
  PhantomSpec spec;
  spec.dims = {12, 12, 12};
  spec.num_classes = 4;
  auto [gt, z0] = generate_phantom(spec);
  PriorAdj prior = prior_of(gt);

  RefineConfig cfg;
  cfg.phase1_steps = 25;
  cfg.phase2_steps = 25;
  RefineResult res = refine(z0, gt, prior, cfg);

  REQUIRE(res.trace.size() == 50);
  CHECK(res.trace.front().step == 1);
  CHECK(res.trace.front().phase == 1);
  CHECK(res.trace[24].phase == 1);
  CHECK(res.trace[25].phase == 2);
  CHECK(res.trace.back().step == 50);
  CHECK(res.trace.back().total < res.trace.front().total);
  for (const TraceRow& row : res.trace) {
    CHECK(row.nonadj >= 0.0);
    if (row.phase == 1) {
      CHECK(row.nonadj == 0.0);
      CHECK(row.total == row.seg);
    }
  }
}

TEST_CASE("refine with no phase 2 never evaluates the penalty") {
  PhantomSpec spec;
  spec.dims = {10, 10, 10};
  spec.num_classes = 4;
  auto [gt, z0] = generate_phantom(spec);
  RefineConfig cfg;
  cfg.phase1_steps = 10;
  cfg.phase2_steps = 0;
  RefineResult res = refine(z0, gt, prior_of(gt), cfg);
  REQUIRE(res.trace.size() == 10);
  for (const TraceRow& row : res.trace) {
    CHECK(row.phase == 1);
    CHECK(row.nonadj == 0.0);
    CHECK(row.total == row.seg);
  }
}

TEST_CASE("refine is deterministic") {
  PhantomSpec spec;
  spec.dims = {10, 10, 10};
  spec.num_classes = 4;
  auto [gt, z0] = generate_phantom(spec);
  PriorAdj prior = prior_of(gt);
  RefineConfig cfg;
  cfg.phase1_steps = 8;
  cfg.phase2_steps = 8;
  RefineResult a = refine(z0, gt, prior, cfg);
  RefineResult b = refine(z0, gt, prior, cfg);
  CHECK(a.prob.values == b.prob.values);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].total == b.trace[i].total);
    CHECK(a.trace[i].nonadj == b.trace[i].nonadj);
  }
}

TEST_CASE("phase 2 with zero lambda continues phase 1 exactly") {
  PhantomSpec spec;
  spec.dims = {10, 10, 10};
  spec.num_classes = 4;
  auto [gt, z0] = generate_phantom(spec);
  PriorAdj prior = prior_of(gt);

  RefineConfig split;
  split.phase1_steps = 12;
  split.phase2_steps = 12;
  split.loss.lambda = 0.0;
  RefineConfig single;
  single.phase1_steps = 24;
  single.phase2_steps = 0;
  single.loss.lambda = 0.0;

  RefineResult a = refine(z0, gt, prior, split);
  RefineResult b = refine(z0, gt, prior, single);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(std::abs(a.trace[i].total - b.trace[i].total) < 1e-12);
    CHECK(std::abs(a.trace[i].seg - b.trace[i].seg) < 1e-12);
    CHECK(std::abs(a.trace[i].dice - b.trace[i].dice) < 1e-12);
    CHECK(std::abs(a.trace[i].ce - b.trace[i].ce) < 1e-12);
  }
  for (std::size_t k = 0; k < a.prob.values.size(); ++k)
    CHECK(std::abs(a.prob.values[k] - b.prob.values[k]) < 1e-12);
}

TEST_CASE("refine applies exactly the analytic logit gradient") {
  PhantomSpec spec;
  spec.dims = {8, 8, 8};
  auto [gt, z0] = generate_phantom(spec);
  PriorAdj prior = prior_of(gt);

  RefineConfig cfg;
  cfg.phase1_steps = 0;
  cfg.phase2_steps = 1;
  cfg.learning_rate = 0.05;
  RefineResult res = refine(z0, gt, prior, cfg);

  LogitMap grad = total_loss_grad_logits(z0, one_hot(gt), prior, cfg.loss);
  const double scale =
      cfg.learning_rate * static_cast<double>(z0.dims.voxel_count());
  LogitMap manual = z0;
  for (std::size_t k = 0; k < manual.values.size(); ++k)
    manual.values[k] -= scale * grad.values[k];
  CHECK(res.prob.values == softmax(manual).values);
}

TEST_CASE("refine reports non-finite losses with the step index") {
  PhantomSpec spec;
  spec.dims = {8, 8, 8};
  auto [gt, z0] = generate_phantom(spec);
  PriorAdj prior = prior_of(gt);
  RefineConfig cfg;
  cfg.phase1_steps = 5;
  cfg.phase2_steps = 0;
  cfg.learning_rate = 1e306;  // overflows the logits after one update
  CHECK_THROWS_WITH(refine(z0, gt, prior, cfg),
                    Catch::Matchers::ContainsSubstring("step 2"));
}

TEST_CASE("refine validates its configuration") {
  PhantomSpec spec;
  spec.dims = {8, 8, 8};
  auto [gt, z0] = generate_phantom(spec);
  PriorAdj prior = prior_of(gt);
  RefineConfig cfg;
  cfg.phase1_steps = 0;
  cfg.phase2_steps = 0;
  CHECK_THROWS_AS(refine(z0, gt, prior, cfg), validation_error);
  cfg.phase2_steps = 1;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(refine(z0, gt, prior, cfg), validation_error);
}
