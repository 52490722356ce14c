#pragma once

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

#include "modstruct/aim.hpp"
#include "modstruct/error.hpp"
#include "modstruct/rng.hpp"

namespace modstruct {

// Free docking faces of both fragments after cutting one tree edge, plus the
// face pair that was removed.
struct TreeSplit {
  std::vector<FaceRef> left_faces;
  std::vector<FaceRef> right_faces;
  std::pair<FaceRef, FaceRef> deleted_pair;  // (parent side, split-module side)
};

struct SplitResult {
  Aim cut;                      // the AIM with the split edge removed
  std::vector<int> left;        // module ids of the fragment holding the root
  std::vector<int> right;       // module ids of the subtree rooted at r
  std::vector<bool> in_right;   // indexed by module id
  TreeSplit split;
};

/// Parent of every module in the depth-first tree rooted at module 1
/// (0 for the root). Assumes a valid AIM.
inline std::vector<int> tree_parents(const Aim& aim) {
  const int n = aim.size();
  std::vector<int> parent(static_cast<std::size_t>(n) + 1, -1);
  parent[1] = 0;
  std::vector<int> stack{1};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int p = 0; p < kFaces; ++p) {
      const int j = aim.at(i, p);
      if (j != 0 && parent[static_cast<std::size_t>(j)] < 0) {
        parent[static_cast<std::size_t>(j)] = i;
        stack.push_back(j);
      }
    }
  }
  return parent;
}

/// Cuts the edge between module `r` and its parent. The left fragment keeps
/// the root; the right fragment is the subtree under `r`.
inline SplitResult dfs_tree_split(const Aim& aim, int r) {
  require_valid(aim);
  const int n = aim.size();
  MODSTRUCT_REQUIRE(r >= 1 && r <= n, ErrorCode::InvalidInput, "split module " + std::to_string(r) + " out of range");
  MODSTRUCT_REQUIRE(r != 1, ErrorCode::RootSplit, "the root module has no parent edge to cut");

  const auto parent = tree_parents(aim);
  const int par = parent[static_cast<std::size_t>(r)];

  SplitResult out;
  out.cut = aim;
  int parent_face = -1;
  int child_face = -1;
  for (int p = 0; p < kFaces; ++p) {
    if (aim.at(par, p) == r) parent_face = p;
    if (aim.at(r, p) == par) child_face = p;
  }
  out.cut.at(par, parent_face) = 0;
  out.cut.at(r, child_face) = 0;
  out.split.deleted_pair = {{par, parent_face}, {r, child_face}};

  out.in_right.assign(static_cast<std::size_t>(n) + 1, false);
  std::vector<int> stack{r};
  out.in_right[static_cast<std::size_t>(r)] = true;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int p = 0; p < kFaces; ++p) {
      const int j = out.cut.at(i, p);
      if (j != 0 && !out.in_right[static_cast<std::size_t>(j)]) {
        out.in_right[static_cast<std::size_t>(j)] = true;
        stack.push_back(j);
      }
    }
  }
  for (int i = 1; i <= n; ++i) {
    auto& side = out.in_right[static_cast<std::size_t>(i)] ? out.right : out.left;
    auto& faces = out.in_right[static_cast<std::size_t>(i)] ? out.split.right_faces : out.split.left_faces;
    side.push_back(i);
    for (int p = 0; p < kFaces; ++p) {
      if (out.cut.at(i, p) == 0) faces.push_back({i, p});
    }
  }
  return out;
}

/// Rotation (in quarter turns) that brings face `r_face` of the right
/// fragment opposite face `l_face` of the left fragment.
constexpr int rotation_to_dock(int l_face, int r_face) noexcept {
  return ((opposite_face(l_face) - r_face) % kFaces + kFaces) % kFaces;
}

/// Relabels faces f_k -> f_{k+turns} on every listed module: a rigid rotation
/// of that fragment by 90 degrees * turns.
inline void rotate_faces(Aim& aim, const std::vector<int>& modules, int turns) {
  turns = ((turns % kFaces) + kFaces) % kFaces;
  if (turns == 0) return;
  for (int m : modules) {
    const Aim::Row old = aim.row(m);
    Aim::Row& row = aim.row(m);
    for (int k = 0; k < kFaces; ++k) row[static_cast<std::size_t>((k + turns) % kFaces)] = old[static_cast<std::size_t>(k)];
  }
}

/// Joins the two fragments of `s` at faces L (left) and R (right), rotating
/// the right fragment so R ends up opposite L.
inline Aim reconnect(const SplitResult& s, FaceRef left_face, FaceRef right_face) {
  const auto& lf = s.split.left_faces;
  const auto& rf = s.split.right_faces;
  MODSTRUCT_REQUIRE(std::find(lf.begin(), lf.end(), left_face) != lf.end(), ErrorCode::InvalidInput,
                    "face L is not a free face of the left fragment");
  MODSTRUCT_REQUIRE(std::find(rf.begin(), rf.end(), right_face) != rf.end(), ErrorCode::InvalidInput,
                    "face R is not a free face of the right fragment");
  Aim out = s.cut;
  const int turns = rotation_to_dock(left_face.face, right_face.face);
  rotate_faces(out, s.right, turns);
  const FaceRef rotated{right_face.module, (right_face.face + turns) % kFaces};
  out.dock(left_face, rotated);
  return out;
}

/// Straight chain along x with the modules in a random order.
inline Aim random_chain(int n, Rng& rng) {
  MODSTRUCT_REQUIRE(n >= 1, ErrorCode::InvalidInput, "chain needs at least one module");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 1);
  rng.shuffle(order);
  Aim aim(n);
  for (std::size_t k = 0; k + 1 < order.size(); ++k) aim.dock({order[k], 0}, {order[k + 1], 2});
  return aim;
}

}  // namespace modstruct
