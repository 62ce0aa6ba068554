#include <catch2/catch_amalgamated.hpp>

#include "adjprior/metrics.hpp"
#include "oracles.hpp"

using namespace adjprior;

namespace {

// Random sparse mask of one label with controllable density.
LabelMap random_mask(SplitMix64& rng, GridDims dims, double density,
                     int label = 1, Spacing spacing = {}) {
  LabelMap lab(dims, spacing, label + 1);
  for (auto& v : lab.voxels)
    if (rng.uniform() < density) v = static_cast<std::uint16_t>(label);
  return lab;
}

}  // namespace

TEST_CASE("label_volume_cm3") {
  LabelMap cube({10, 10, 10}, Spacing{1, 1, 1}, 2);
  for (auto& v : cube.voxels) v = 1;
  CHECK(label_volume_cm3(cube, 1) == 1.0);
  CHECK(label_volume_cm3(cube, 0) == 0.0);

  LabelMap single({1, 1, 1}, Spacing{10, 10, 10}, 2, {1});
  CHECK(label_volume_cm3(single, 1) == 1.0);

  CHECK_THROWS_AS(label_volume_cm3(cube, 2), validation_error);
  CHECK_THROWS_AS(label_volume_cm3(cube, -1), validation_error);
}

TEST_CASE("volumetric_error") {
  VolumetricError e = volumetric_error(100.0, 90.0);
  CHECK(e.err_cm3 == 10.0);
  REQUIRE(e.err_pct);
  CHECK(*e.err_pct == 10.0);

  e = volumetric_error(50.0, 50.0);
  CHECK(e.err_cm3 == 0.0);
  CHECK(*e.err_pct == 0.0);

  e = volumetric_error(0.0, 5.0);
  CHECK(e.err_cm3 == 5.0);
  CHECK_FALSE(e.err_pct);
}

TEST_CASE("dice_score identities") {
  SplitMix64 rng(127);
  LabelMap a = random_mask(rng, {6, 6, 6}, 0.3);
  CHECK(dice_score(a, a, 1) == 1.0);

  // Disjoint non-empty masks.
  LabelMap left({4, 1, 1}, Spacing{}, 2, {1, 1, 0, 0});
  LabelMap right({4, 1, 1}, Spacing{}, 2, {0, 0, 1, 1});
  CHECK(dice_score(left, right, 1) == 0.0);

  // |X| = 2, |Y| = 2, overlap 1.
  LabelMap x({4, 1, 1}, Spacing{}, 2, {1, 1, 0, 0});
  LabelMap y({4, 1, 1}, Spacing{}, 2, {0, 1, 1, 0});
  CHECK(dice_score(x, y, 1) == 0.5);

  // Both masks empty.
  LabelMap empty({4, 1, 1}, Spacing{}, 2);
  CHECK_FALSE(dice_score(empty, empty, 1));

  CHECK_THROWS_AS(dice_score(x, LabelMap({3, 1, 1}, Spacing{}, 2), 1),
                  validation_error);
}

TEST_CASE("dice_score is symmetric and spacing invariant") {
  SplitMix64 rng(131);
  LabelMap a = random_mask(rng, {5, 5, 5}, 0.4);
  LabelMap b = random_mask(rng, {5, 5, 5}, 0.4);
  CHECK(dice_score(a, b, 1) == dice_score(b, a, 1));
  LabelMap a2 = a, b2 = b;
  a2.spacing = b2.spacing = Spacing{0.5, 2.0, 3.0};
  CHECK(dice_score(a2, b2, 1) == dice_score(a, b, 1));
}

TEST_CASE("hd95 closed forms") {
  SplitMix64 rng(137);
  LabelMap a = random_mask(rng, {6, 6, 6}, 0.3);
  auto same = hd95_mm(a, a, 1);
  REQUIRE(same);
  CHECK(*same == 0.0);

  // Two single-voxel masks 5 mm apart along y.
  LabelMap p({3, 7, 3}, Spacing{1, 1, 1}, 2);
  LabelMap q = p;
  p.at(1, 0, 1) = 1;
  q.at(1, 5, 1) = 1;
  auto d = hd95_mm(p, q, 1);
  REQUIRE(d);
  CHECK(*d == 5.0);

  // Either mask empty is undefined.
  LabelMap empty({3, 7, 3}, Spacing{1, 1, 1}, 2);
  CHECK_FALSE(hd95_mm(p, empty, 1));
  CHECK_FALSE(hd95_mm(empty, q, 1));

  LabelMap other_spacing = q;
  other_spacing.spacing = Spacing{2, 2, 2};
  CHECK_THROWS_AS(hd95_mm(p, other_spacing, 1), validation_error);
}

TEST_CASE("hd95 equals the all-pairs brute-force oracle") {
  SplitMix64 rng(139);
  for (int trial = 0; trial < 8; ++trial) {
    GridDims dims{12, 12, 12};
    Spacing spacing{0.5 + rng.uniform(), 0.5 + rng.uniform(),
                    0.5 + rng.uniform()};
    LabelMap a = random_mask(rng, dims, 0.15, 1, spacing);
    LabelMap b = random_mask(rng, dims, 0.15, 1, spacing);
    if (a.voxels == std::vector<std::uint16_t>(a.voxels.size(), 0)) continue;
    auto got = hd95_mm(a, b, 1);
    if (!got) continue;
    CHECK(*got == oracles::brute_force_hd95(a, b, 1));
  }
}

TEST_CASE("hd95 respects translation and spacing scale") {
  SplitMix64 rng(149);
  // A compact blob and its copy translated 3 voxels along x.
  GridDims dims{12, 8, 8};
  LabelMap a(dims, Spacing{2, 2, 2}, 2);
  for (int z = 2; z < 5; ++z)
    for (int y = 2; y < 5; ++y)
      for (int x = 2; x < 5; ++x) a.at(x, y, z) = 1;
  LabelMap b(dims, Spacing{2, 2, 2}, 2);
  for (int z = 2; z < 5; ++z)
    for (int y = 2; y < 5; ++y)
      for (int x = 5; x < 8; ++x) b.at(x, y, z) = 1;

  // Directed full Hausdorff of a 3-voxel translation at spacing 2 is 6 mm;
  // the 95th percentile cannot exceed it.
  auto d = hd95_mm(a, b, 1);
  REQUIRE(d);
  CHECK(*d <= 3.0 * 2.0);

  // Translating both masks together changes nothing.
  LabelMap a2(dims, Spacing{2, 2, 2}, 2);
  LabelMap b2(dims, Spacing{2, 2, 2}, 2);
  for (int z = 3; z < 6; ++z)
    for (int y = 3; y < 6; ++y) {
      for (int x = 3; x < 6; ++x) a2.at(x, y, z) = 1;
      for (int x = 6; x < 9; ++x) b2.at(x, y, z) = 1;
    }
  CHECK(*hd95_mm(a2, b2, 1) == *d);

  // Scaling the spacing scales the distance.
  LabelMap a3 = a, b3 = b;
  a3.spacing = b3.spacing = Spacing{4, 4, 4};
  CHECK(*hd95_mm(a3, b3, 1) == Catch::Approx(2.0 * *d).epsilon(1e-12));
}

TEST_CASE("evaluate assembles per-label metrics") {
  SplitMix64 rng(151);
  LabelMap gt({8, 8, 8}, Spacing{1, 1, 1}, 4);
  // Label 1: block; label 2: absent from prediction; label 3: absent in both.
  for (int z = 1; z < 4; ++z)
    for (int y = 1; y < 4; ++y)
      for (int x = 1; x < 4; ++x) gt.at(x, y, z) = 1;
  for (int z = 5; z < 7; ++z)
    for (int y = 5; y < 7; ++y)
      for (int x = 5; x < 7; ++x) gt.at(x, y, z) = 2;

  SECTION("identical inputs give the all-perfect report") {
    MetricReport r = evaluate(gt, gt);
    REQUIRE(r.labels.size() == 3);
    for (const LabelMetrics& m : r.labels) {
      CHECK(m.err_cm3 == 0.0);
      if (m.label < 3) {
        REQUIRE(m.dsc);
        CHECK(*m.dsc == 1.0);
        REQUIRE(m.hd95_mm);
        CHECK(*m.hd95_mm == 0.0);
        REQUIRE(m.err_pct);
        CHECK(*m.err_pct == 0.0);
      } else {
        CHECK_FALSE(m.dsc);    // label absent from both
        CHECK_FALSE(m.hd95_mm);
        CHECK_FALSE(m.err_pct);
        CHECK(m.vol_gt_cm3 == 0.0);
        CHECK(m.vol_pred_cm3 == 0.0);
      }
    }
  }

  SECTION("label missing from the prediction") {
    LabelMap pred = gt;
    for (auto& v : pred.voxels)
      if (v == 2) v = 0;
    MetricReport r = evaluate(gt, pred);
    const LabelMetrics& m = r.labels[1];
    REQUIRE(m.label == 2);
    REQUIRE(m.dsc);
    CHECK(*m.dsc == 0.0);
    CHECK_FALSE(m.hd95_mm);
    REQUIRE(m.err_pct);
    CHECK(*m.err_pct == 100.0);
  }

  SECTION("shape and spacing mismatches are rejected") {
    CHECK_THROWS_AS(evaluate(gt, LabelMap({8, 8, 7}, Spacing{1, 1, 1}, 4)),
                    validation_error);
    CHECK_THROWS_AS(evaluate(gt, LabelMap({8, 8, 8}, Spacing{2, 1, 1}, 4)),
                    validation_error);
    CHECK_THROWS_AS(evaluate(gt, LabelMap({8, 8, 8}, Spacing{1, 1, 1}, 3)),
                    validation_error);
  }
}

TEST_CASE("digitized sphere volume approximates the analytic ball") {
  const double radius = 10.0;
  GridDims dims{25, 25, 25};
  LabelMap sphere(dims, Spacing{1, 1, 1}, 2);
  for (int z = 0; z < dims.d; ++z)
    for (int y = 0; y < dims.w; ++y)
      for (int x = 0; x < dims.h; ++x) {
        double dx = x - 12.0, dy = y - 12.0, dz = z - 12.0;
        if (dx * dx + dy * dy + dz * dz <= radius * radius)
          sphere.at(x, y, z) = 1;
      }
  double measured = label_volume_cm3(sphere, 1);
  double analytic = 4.0 / 3.0 * 3.14159265358979323846 * 1000.0 / 1000.0;
  CHECK(std::abs(measured - analytic) / analytic < 0.05);
}
