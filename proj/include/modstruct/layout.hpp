#pragma once

#include <Eigen/Core>

#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "modstruct/aim.hpp"
#include "modstruct/error.hpp"
#include "modstruct/lattice.hpp"
#include "modstruct/module_spec.hpp"

namespace modstruct {

namespace detail {

// Depth-first placement from module 1 at the origin. Children are visited in
// face order. Assumes a valid AIM; collisions are reported through `overlap`.
inline std::vector<Cell> dfs_place(const Aim& aim, bool* overlap) {
  const int n = aim.size();
  std::vector<Cell> cells(static_cast<std::size_t>(n));
  std::vector<bool> placed(static_cast<std::size_t>(n) + 1, false);
  std::unordered_set<Cell, CellHash> occupied;
  occupied.reserve(static_cast<std::size_t>(n) * 2);
  *overlap = false;

  std::vector<int> stack{1};
  placed[1] = true;
  occupied.insert(cells[0]);
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const Cell here = cells[static_cast<std::size_t>(i - 1)];
    for (int p = kFaces - 1; p >= 0; --p) {
      const int j = aim.at(i, p);
      if (j == 0 || placed[static_cast<std::size_t>(j)]) continue;
      placed[static_cast<std::size_t>(j)] = true;
      const Cell c = here + face_offset(p);
      cells[static_cast<std::size_t>(j - 1)] = c;
      if (!occupied.insert(c).second) *overlap = true;
      stack.push_back(j);
    }
  }
  return cells;
}

}  // namespace detail

/// Un-centered lattice placement of every module (module 1 at the origin).
/// Throws InvalidAim on a malformed AIM and Overlap if two modules collide.
inline std::vector<Cell> place_on_grid(const Aim& aim) {
  require_valid(aim);
  bool overlap = false;
  auto cells = detail::dfs_place(aim, &overlap);
  MODSTRUCT_REQUIRE(!overlap, ErrorCode::Overlap, "two modules occupy the same lattice cell");
  return cells;
}

/// True iff the placement assigns every module a distinct cell. Positions
/// live on the integer lattice, so the edge length plays no role.
inline bool check_feasible(const Aim& aim) {
  require_valid(aim);
  bool overlap = false;
  detail::dfs_place(aim, &overlap);
  return !overlap;
}

// Centered module positions plus the data they were derived from.
struct LayoutConfiguration {
  std::vector<Eigen::Vector3d> positions;  // m, structure frame, mass-centered
  std::vector<Cell> cells;                 // un-centered lattice placement
  Roster roster;
  double edge_length = 1.0;

  int size() const noexcept { return static_cast<int>(positions.size()); }
  double total_mass() const { return modstruct::total_mass(roster); }
};

/// Builds a layout from a lattice placement: scales by the edge length and
/// shifts the mass-weighted centroid to the origin.
inline LayoutConfiguration layout_from_cells(std::vector<Cell> cells, const Roster& roster, double edge_length) {
  MODSTRUCT_REQUIRE(cells.size() == roster.size(), ErrorCode::InvalidInput,
                    "placement has " + std::to_string(cells.size()) + " cells for " +
                        std::to_string(roster.size()) + " modules");
  MODSTRUCT_REQUIRE(edge_length > 0.0, ErrorCode::InvalidInput, "edge length must be positive");
  LayoutConfiguration layout;
  layout.roster = roster;
  layout.edge_length = edge_length;
  layout.positions.resize(cells.size());

  // Center in lattice units first; the sum of integers is exact.
  double mass = 0.0;
  Eigen::Vector2d weighted = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    mass += roster[i].mass;
    weighted += roster[i].mass * Eigen::Vector2d(cells[i].x, cells[i].y);
  }
  const Eigen::Vector2d centroid = weighted / mass;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Eigen::Vector2d d = Eigen::Vector2d(cells[i].x, cells[i].y) - centroid;
    layout.positions[i] = Eigen::Vector3d(d.x() * edge_length, d.y() * edge_length, 0.0);
  }
  // One correction pass removes the rounding left over from the shift.
  Eigen::Vector3d residual = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < cells.size(); ++i) residual += roster[i].mass * layout.positions[i];
  residual /= mass;
  for (auto& p : layout.positions) p -= residual;

  layout.cells = std::move(cells);
  return layout;
}

/// Reconstructs centered module positions from an AIM: depth-first placement
/// with the Step offsets, then a shift by the mass-weighted centroid.
inline LayoutConfiguration pos_tree_search(const Aim& aim, const Roster& roster, double edge_length) {
  MODSTRUCT_REQUIRE(static_cast<int>(roster.size()) == aim.size(), ErrorCode::InvalidInput,
                    "roster size does not match AIM size");
  return layout_from_cells(place_on_grid(aim), roster, edge_length);
}

/// Spanning-tree AIM for a connected lattice placement, grown depth-first from
/// module 1. Throws InvalidInput if cells collide or are disconnected.
inline Aim aim_from_cells(const std::vector<Cell>& cells) {
  const int n = static_cast<int>(cells.size());
  MODSTRUCT_REQUIRE(n >= 1, ErrorCode::InvalidInput, "empty placement");
  std::unordered_map<Cell, int, CellHash> owner;
  for (int i = 0; i < n; ++i) {
    MODSTRUCT_REQUIRE(owner.emplace(cells[static_cast<std::size_t>(i)], i + 1).second, ErrorCode::InvalidInput,
                      "placement has overlapping cells");
  }
  Aim aim(n);
  std::vector<bool> seen(static_cast<std::size_t>(n) + 1, false);
  std::vector<int> stack{1};
  seen[1] = true;
  int reached = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int p = kFaces - 1; p >= 0; --p) {
      auto it = owner.find(cells[static_cast<std::size_t>(i - 1)] + face_offset(p));
      if (it == owner.end() || seen[static_cast<std::size_t>(it->second)]) continue;
      const int j = it->second;
      seen[static_cast<std::size_t>(j)] = true;
      ++reached;
      aim.dock({i, p}, {j, opposite_face(p)});
      stack.push_back(j);
    }
  }
  MODSTRUCT_REQUIRE(reached == n, ErrorCode::InvalidInput, "placement is not connected");
  return aim;
}

}  // namespace modstruct
