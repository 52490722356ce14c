#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <functional>

namespace modstruct {

// Integer cell on the square lattice, in units of the module edge length.
struct Cell {
  int x = 0;
  int y = 0;

  auto operator<=>(const Cell&) const = default;
  Cell operator+(const Cell& o) const { return {x + o.x, y + o.y}; }
  Cell operator-(const Cell& o) const { return {x - o.x, y - o.y}; }
};

struct CellHash {
  std::size_t operator()(const Cell& c) const noexcept {
    return std::hash<long long>{}((static_cast<long long>(c.x) << 32) ^ static_cast<unsigned int>(c.y));
  }
};

/// Element of the 8-element dihedral group of the square lattice:
/// optional x/y swap, then sign flips.
struct LatticeSymmetry {
  bool swap_xy = false;
  int sign_x = 1;
  int sign_y = 1;

  constexpr Cell apply(Cell c) const {
    const int x = swap_xy ? c.y : c.x;
    const int y = swap_xy ? c.x : c.y;
    return {sign_x * x, sign_y * y};
  }

  template <typename Vec>
  Vec apply_vec(const Vec& v) const {
    Vec out = v;
    out[0] = sign_x * (swap_xy ? v[1] : v[0]);
    out[1] = sign_y * (swap_xy ? v[0] : v[1]);
    return out;
  }
};

inline constexpr std::array<LatticeSymmetry, 8> kLatticeSymmetries = {{
    {false, 1, 1},
    {false, -1, 1},
    {false, 1, -1},
    {false, -1, -1},
    {true, 1, 1},
    {true, -1, 1},
    {true, 1, -1},
    {true, -1, -1},
}};

}  // namespace modstruct
