#pragma once

#include <Eigen/Core>

#include <array>
#include <compare>
#include <cstddef>
#include <string>
#include <vector>

#include "modstruct/error.hpp"
#include "modstruct/lattice.hpp"

namespace modstruct {

// Docking faces, in the column order of the Step matrix: f1=+x, f2=+y,
// f3=-x, f4=-y. Stored zero-based.
inline constexpr int kFaces = 4;

constexpr int opposite_face(int face) noexcept { return (face + 2) % kFaces; }

/// Unit lattice offset of the neighbour docked at `face`.
constexpr Cell face_offset(int face) noexcept {
  constexpr std::array<Cell, kFaces> kOffsets = {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};
  return kOffsets[static_cast<std::size_t>(face)];
}

/// Step matrix scaled by the module edge length; column p is the offset of a
/// module docked at face p. The z row is zero.
inline Eigen::Matrix<double, 3, 4> step_matrix(double edge_length) {
  Eigen::Matrix<double, 3, 4> step;
  // clang-format off
  step << 1, 0, -1,  0,
          0, 1,  0, -1,
          0, 0,  0,  0;
  // clang-format on
  return step * edge_length;
}

struct FaceRef {
  int module = 0;  // 1-based
  int face = 0;    // 0..3

  auto operator<=>(const FaceRef&) const = default;
};

/// Assembly incidence matrix: row i holds, per face, the id of the docked
/// module or 0 when the face is free. Module ids are 1-based.
class Aim {
 public:
  using Row = std::array<int, kFaces>;

  Aim() = default;
  explicit Aim(int n) : rows_(static_cast<std::size_t>(n), Row{0, 0, 0, 0}) {}
  explicit Aim(std::vector<Row> rows) : rows_(std::move(rows)) {}

  int size() const noexcept { return static_cast<int>(rows_.size()); }

  int at(int module, int face) const { return rows_[index(module)][static_cast<std::size_t>(face)]; }
  int& at(int module, int face) { return rows_[index(module)][static_cast<std::size_t>(face)]; }
  int at(FaceRef f) const { return at(f.module, f.face); }
  int& at(FaceRef f) { return at(f.module, f.face); }

  const Row& row(int module) const { return rows_[index(module)]; }
  Row& row(int module) { return rows_[index(module)]; }
  const std::vector<Row>& rows() const noexcept { return rows_; }

  /// Docks face `a` to face `b` in both directions.
  void dock(FaceRef a, FaceRef b) {
    at(a) = b.module;
    at(b) = a.module;
  }

  bool operator==(const Aim&) const = default;

 private:
  static std::size_t index(int module) { return static_cast<std::size_t>(module - 1); }
  std::vector<Row> rows_;
};

struct ValidationReport {
  bool entries_in_range = true;
  bool no_self_reference = true;
  bool mutual = true;
  bool opposite_faces = true;
  bool tree_connected = true;
  int edge_count = 0;
  std::vector<std::string> issues;

  bool ok() const noexcept {
    return entries_in_range && no_self_reference && mutual && opposite_faces && tree_connected;
  }
  std::string summary() const {
    std::string s;
    for (const auto& i : issues) {
      if (!s.empty()) s += "; ";
      s += i;
    }
    return s;
  }
};

/// Checks every AIM invariant and reports each violation; never throws.
inline ValidationReport validate_aim(const Aim& aim) {
  ValidationReport rep;
  const int n = aim.size();
  if (n == 0) {
    rep.tree_connected = false;
    rep.issues.push_back("empty AIM");
    return rep;
  }
  auto note = [&rep](bool& flag, std::string msg) {
    flag = false;
    rep.issues.push_back(std::move(msg));
  };

  int docked_faces = 0;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n) + 1);
  for (int i = 1; i <= n; ++i) {
    for (int p = 0; p < kFaces; ++p) {
      const int j = aim.at(i, p);
      if (j == 0) continue;
      const std::string where = "module " + std::to_string(i) + " face f" + std::to_string(p + 1);
      if (j < 0 || j > n) {
        note(rep.entries_in_range, where + ": entry " + std::to_string(j) + " out of range");
        continue;
      }
      if (j == i) {
        note(rep.no_self_reference, where + ": self-reference");
        continue;
      }
      ++docked_faces;
      int back = 0;
      int back_face = -1;
      for (int q = 0; q < kFaces; ++q) {
        if (aim.at(j, q) == i) {
          ++back;
          back_face = q;
        }
      }
      if (back != 1) {
        note(rep.mutual, where + ": module " + std::to_string(j) + " references back " + std::to_string(back) +
                             " times (expected 1)");
        continue;
      }
      if (back_face != opposite_face(p)) {
        note(rep.opposite_faces, where + ": docks face f" + std::to_string(back_face + 1) + " of module " +
                                     std::to_string(j) + ", not the opposite face");
      }
      if (i < j) {
        adj[static_cast<std::size_t>(i)].push_back(j);
        adj[static_cast<std::size_t>(j)].push_back(i);
      }
    }
  }
  rep.edge_count = docked_faces / 2;

  std::vector<bool> seen(static_cast<std::size_t>(n) + 1, false);
  std::vector<int> stack{1};
  seen[1] = true;
  int reached = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        ++reached;
        stack.push_back(v);
      }
    }
  }
  if (reached != n) {
    note(rep.tree_connected, "docking graph is disconnected (" + std::to_string(reached) + " of " +
                                 std::to_string(n) + " modules reachable from module 1)");
  }
  if (rep.mutual && rep.edge_count != n - 1) {
    note(rep.tree_connected, "expected " + std::to_string(n - 1) + " docked pairs, found " +
                                 std::to_string(rep.edge_count));
  }
  return rep;
}

inline void require_valid(const Aim& aim) {
  const auto rep = validate_aim(aim);
  MODSTRUCT_REQUIRE(rep.ok(), ErrorCode::InvalidAim, rep.summary());
}

}  // namespace modstruct
