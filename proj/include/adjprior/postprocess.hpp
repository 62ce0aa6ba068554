#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <set>
#include <vector>

#include "adjprior/errors.hpp"
#include "adjprior/volume.hpp"

namespace adjprior {

namespace detail {

// Iterative 6-connected flood fill from `seed` over voxels where
// `member(idx)` holds and `visited` is still clear. Calls `visit` on every
// reached voxel.
template <typename Member, typename Visit>
void flood6(const GridDims& g, std::int64_t seed, std::vector<std::uint8_t>& visited,
            Member member, Visit visit) {
  const std::int64_t sy = g.h;
  const std::int64_t sz = static_cast<std::int64_t>(g.h) * g.w;
  std::vector<std::int64_t> stack{seed};
  visited[static_cast<std::size_t>(seed)] = 1;
  while (!stack.empty()) {
    std::int64_t i = stack.back();
    stack.pop_back();
    visit(i);
    int x = static_cast<int>(i % g.h);
    int y = static_cast<int>((i / g.h) % g.w);
    int z = static_cast<int>(i / sz);
    auto push = [&](std::int64_t j) {
      if (!visited[static_cast<std::size_t>(j)] && member(j)) {
        visited[static_cast<std::size_t>(j)] = 1;
        stack.push_back(j);
      }
    };
    if (x > 0) push(i - 1);
    if (x + 1 < g.h) push(i + 1);
    if (y > 0) push(i - sy);
    if (y + 1 < g.w) push(i + sy);
    if (z > 0) push(i - sz);
    if (z + 1 < g.d) push(i + sz);
  }
}

inline std::array<int, 3> coords_of(const GridDims& g, std::int64_t i) {
  return {static_cast<int>(i % g.h), static_cast<int>((i / g.h) % g.w),
          static_cast<int>(i / (static_cast<std::int64_t>(g.h) * g.w))};
}

}  // namespace detail

// Keeps only the largest 6-connected component of `label`, relabeling the
// rest to background. A size tie keeps the component containing the
// lexicographically smallest (x, y, z) voxel.
inline LabelMap largest_component(const LabelMap& lab, int label) {
  if (label < 1 || label >= lab.num_classes)
    throw validation_error("label out of range");
  const GridDims& g = lab.dims;
  const std::int64_t n = g.voxel_count();
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(n), 0);
  std::vector<std::int32_t> comp(static_cast<std::size_t>(n), -1);
  auto member = [&](std::int64_t j) { return lab.voxels[static_cast<std::size_t>(j)] == label; };

  std::int32_t num_comps = 0;
  std::int32_t best = -1;
  std::int64_t best_size = 0;
  std::array<int, 3> best_seed{};
  for (std::int64_t i = 0; i < n; ++i) {
    if (!member(i) || visited[static_cast<std::size_t>(i)]) continue;
    std::int32_t id = num_comps++;
    std::int64_t size = 0;
    std::array<int, 3> seed{g.h, g.w, g.d};
    detail::flood6(g, i, visited, member, [&](std::int64_t j) {
      comp[static_cast<std::size_t>(j)] = id;
      ++size;
      seed = std::min(seed, detail::coords_of(g, j));
    });
    if (size > best_size || (size == best_size && best >= 0 && seed < best_seed)) {
      best = id;
      best_size = size;
      best_seed = seed;
    }
  }
  if (num_comps <= 1) return lab;
  LabelMap out = lab;
  for (std::int64_t i = 0; i < n; ++i)
    if (comp[static_cast<std::size_t>(i)] >= 0 &&
        comp[static_cast<std::size_t>(i)] != best)
      out.voxels[static_cast<std::size_t>(i)] = 0;
  return out;
}

// Relabels to `label` every background cavity that cannot reach the volume
// border and whose entire adjacent foreground carries `label`. Background
// reachable from the border is never modified.
inline LabelMap fill_holes(const LabelMap& lab, int label) {
  if (label < 1 || label >= lab.num_classes)
    throw validation_error("label out of range");
  const GridDims& g = lab.dims;
  const std::int64_t n = g.voxel_count();
  auto background = [&](std::int64_t j) { return lab.voxels[static_cast<std::size_t>(j)] == 0; };

  // Mark background reachable from the border.
  std::vector<std::uint8_t> reachable(static_cast<std::size_t>(n), 0);
  for (std::int64_t i = 0; i < n; ++i) {
    if (!background(i) || reachable[static_cast<std::size_t>(i)]) continue;
    auto [x, y, z] = detail::coords_of(g, i);
    bool border = x == 0 || x + 1 == g.h || y == 0 || y + 1 == g.w || z == 0 ||
                  z + 1 == g.d;
    if (border) detail::flood6(g, i, reachable, background, [](std::int64_t) {});
  }

  LabelMap out = lab;
  const std::int64_t sy = g.h;
  const std::int64_t sz = static_cast<std::int64_t>(g.h) * g.w;
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(n), 0);
  for (std::int64_t i = 0; i < n; ++i) {
    if (!background(i) || reachable[static_cast<std::size_t>(i)] ||
        seen[static_cast<std::size_t>(i)])
      continue;
    // Unreachable cavity: collect it and the labels enclosing it.
    std::vector<std::int64_t> cavity;
    std::set<int> enclosing;
    detail::flood6(g, i, seen, background, [&](std::int64_t j) {
      cavity.push_back(j);
      auto [x, y, z] = detail::coords_of(g, j);
      auto note = [&](std::int64_t k) {
        std::uint16_t v = lab.voxels[static_cast<std::size_t>(k)];
        if (v != 0) enclosing.insert(v);
      };
      if (x > 0) note(j - 1);
      if (x + 1 < g.h) note(j + 1);
      if (y > 0) note(j - sy);
      if (y + 1 < g.w) note(j + sy);
      if (z > 0) note(j - sz);
      if (z + 1 < g.d) note(j + sz);
    });
    if (enclosing.size() == 1 && *enclosing.begin() == label)
      for (std::int64_t j : cavity)
        out.voxels[static_cast<std::size_t>(j)] = static_cast<std::uint16_t>(label);
  }
  return out;
}

// Inference-time cleanup: one largest-component sweep over all foreground
// labels in ascending order, then one hole-filling sweep in the same order.
// The two-sweep order makes the result a fixed point, so the operation is
// idempotent.
inline LabelMap postprocess_all(const LabelMap& lab) {
  LabelMap out = lab;
  for (int label = 1; label < lab.num_classes; ++label)
    out = largest_component(out, label);
  for (int label = 1; label < lab.num_classes; ++label)
    out = fill_holes(out, label);
  return out;
}

}  // namespace adjprior
