#include <catch2/catch_amalgamated.hpp>

#include "adjprior/phantom.hpp"
#include "adjprior/postprocess.hpp"
#include "oracles.hpp"

using namespace adjprior;

TEST_CASE("largest_component removes smaller blobs") {
  LabelMap lab({12, 4, 4}, Spacing{}, 2);
  for (int x = 0; x < 5; ++x)
    for (int y = 0; y < 2; ++y) lab.at(x, y, 0) = 1;  // 10 voxels
  for (int x = 8; x < 11; ++x) lab.at(x, 3, 3) = 1;   // 3 voxels
  LabelMap cleaned = largest_component(lab, 1);
  CHECK(oracles::count_components(cleaned, 1) == 1);
  CHECK(cleaned.at(0, 0, 0) == 1);
  CHECK(cleaned.at(8, 3, 3) == 0);
  CHECK(cleaned.at(9, 3, 3) == 0);
  CHECK(cleaned.at(10, 3, 3) == 0);

  SECTION("single component and absent label are untouched") {
    CHECK(largest_component(cleaned, 1) == cleaned);
    LabelMap empty({4, 4, 4}, Spacing{}, 3);
    CHECK(largest_component(empty, 2) == empty);
  }

  SECTION("label range is validated") {
    CHECK_THROWS_AS(largest_component(lab, 0), validation_error);
    CHECK_THROWS_AS(largest_component(lab, 2), validation_error);
  }
}

TEST_CASE("largest_component tie keeps the lexicographically smallest seed") {
  LabelMap lab({5, 5, 5}, Spacing{}, 2);
  lab.at(2, 0, 0) = 1;  // (x,y,z) = (2,0,0)
  lab.at(0, 2, 0) = 1;  // (0,2,0) is lexicographically smaller
  LabelMap kept = largest_component(lab, 1);
  CHECK(kept.at(0, 2, 0) == 1);
  CHECK(kept.at(2, 0, 0) == 0);
}

TEST_CASE("fill_holes fills an enclosed cavity") {
  // 3x3x3 shell of label 1 with a background center.
  LabelMap lab({5, 5, 5}, Spacing{}, 2);
  for (int z = 1; z <= 3; ++z)
    for (int y = 1; y <= 3; ++y)
      for (int x = 1; x <= 3; ++x) lab.at(x, y, z) = 1;
  lab.at(2, 2, 2) = 0;

  LabelMap filled = fill_holes(lab, 1);
  CHECK(filled.at(2, 2, 2) == 1);

  // Everything reachable from the border stays background.
  auto reach = oracles::border_reachable_background(lab);
  const std::int64_t n = lab.dims.voxel_count();
  for (std::int64_t i = 0; i < n; ++i)
    if (reach[static_cast<std::size_t>(i)])
      CHECK(filled.voxels[static_cast<std::size_t>(i)] == 0);
}

TEST_CASE("fill_holes leaves solids, tunnels, and foreign cavities alone") {
  LabelMap solid({4, 4, 4}, Spacing{}, 2);
  for (auto& v : solid.voxels) v = 1;
  CHECK(fill_holes(solid, 1) == solid);

  // A tunnel of background through the block reaches the border.
  LabelMap tunnel({5, 5, 5}, Spacing{}, 2);
  for (int z = 1; z <= 3; ++z)
    for (int y = 1; y <= 3; ++y)
      for (int x = 1; x <= 3; ++x) tunnel.at(x, y, z) = 1;
  for (int z = 0; z < 5; ++z) tunnel.at(2, 2, z) = 0;
  CHECK(fill_holes(tunnel, 1) == tunnel);

  // A cavity jointly enclosed by labels 1 and 2 belongs to neither.
  LabelMap mixed({5, 5, 5}, Spacing{}, 3);
  for (int z = 1; z <= 3; ++z)
    for (int y = 1; y <= 3; ++y)
      for (int x = 1; x <= 3; ++x) mixed.at(x, y, z) = z == 3 ? 2 : 1;
  mixed.at(2, 2, 2) = 0;
  CHECK(fill_holes(mixed, 1) == mixed);
  CHECK(fill_holes(mixed, 2) == mixed);
}

TEST_CASE("postprocess_all corrects satellites and holes together") {
  LabelMap lab({12, 8, 8}, Spacing{}, 2);
  for (int z = 1; z <= 5; ++z)
    for (int y = 1; y <= 5; ++y)
      for (int x = 1; x <= 5; ++x) lab.at(x, y, z) = 1;
  lab.at(3, 3, 3) = 0;   // internal hole
  lab.at(10, 6, 6) = 1;  // satellite blob

  LabelMap expected = lab;
  expected.at(3, 3, 3) = 1;
  expected.at(10, 6, 6) = 0;
  CHECK(postprocess_all(lab) == expected);

  SECTION("clean maps are unchanged") {
    CHECK(postprocess_all(expected) == expected);
  }
}

TEST_CASE("postprocess_all postconditions on corrupted phantoms") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    LabelMap lab = oracles::corrupted_phantom_labels(seed);
    LabelMap once = postprocess_all(lab);

    // Idempotent.
    CHECK(postprocess_all(once) == once);

    for (int label = 1; label < lab.num_classes; ++label) {
      // At most one component per present label.
      CHECK(oracles::count_components(once, label) <= 1);

      // Volume monotonicity of the two stages.
      auto count = [label](const LabelMap& m) {
        std::int64_t c = 0;
        for (auto v : m.voxels) c += v == label;
        return c;
      };
      LabelMap lc = largest_component(lab, label);
      CHECK(count(lc) <= count(lab));
      CHECK(count(fill_holes(lc, label)) >= count(lc));
    }

    // No single-label cavity survives.
    CHECK_FALSE(oracles::has_single_label_cavity(once));
  }
}
