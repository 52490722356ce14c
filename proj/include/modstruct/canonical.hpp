#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <tuple>
#include <vector>

#include "modstruct/aim.hpp"
#include "modstruct/lattice.hpp"
#include "modstruct/layout.hpp"
#include "modstruct/module_spec.hpp"
#include "modstruct/rng.hpp"

namespace modstruct {

// Physical identity of a module. Two modules with equal tokens are
// interchangeable. Swapping the lattice axes swaps the in-plane inertias.
struct ModuleToken {
  double mass = 0.0;
  double jx = 0.0;
  double jy = 0.0;
  double jz = 0.0;

  auto operator<=>(const ModuleToken&) const = default;

  static ModuleToken of(const ModuleSpec& s) { return {s.mass, s.inertia_diag.x(), s.inertia_diag.y(), s.inertia_diag.z()}; }
  ModuleToken transformed(const LatticeSymmetry& g) const { return g.swap_xy ? ModuleToken{mass, jy, jx, jz} : *this; }
};

struct CanonicalKey {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  auto operator<=>(const CanonicalKey&) const = default;
};

struct CanonicalKeyHash {
  std::size_t operator()(const CanonicalKey& k) const noexcept { return static_cast<std::size_t>(k.lo ^ mix64(k.hi)); }
};

namespace detail {

using PlacedToken = std::tuple<int, int, ModuleToken>;

inline std::vector<PlacedToken> normalized_form(const std::vector<Cell>& cells, const std::vector<ModuleToken>& tokens,
                                                const LatticeSymmetry& g) {
  std::vector<PlacedToken> form;
  form.reserve(cells.size());
  int min_x = std::numeric_limits<int>::max();
  int min_y = std::numeric_limits<int>::max();
  for (const Cell& c : cells) {
    const Cell t = g.apply(c);
    min_x = std::min(min_x, t.x);
    min_y = std::min(min_y, t.y);
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell t = g.apply(cells[i]);
    form.emplace_back(t.x - min_x, t.y - min_y, tokens[i].transformed(g));
  }
  std::sort(form.begin(), form.end());
  return form;
}

inline std::uint64_t absorb(std::uint64_t h, std::uint64_t v) { return mix64(h ^ mix64(v)); }

}  // namespace detail

/// Canonical key of a lattice placement with module identities attached.
/// Equal for placements related by translation or any of the 8 lattice
/// symmetries; 128 hashed bits otherwise.
inline CanonicalKey canonical_key(const std::vector<Cell>& cells, const Roster& roster) {
  std::vector<ModuleToken> tokens;
  tokens.reserve(roster.size());
  for (const auto& s : roster) tokens.push_back(ModuleToken::of(s));

  auto best = detail::normalized_form(cells, tokens, kLatticeSymmetries[0]);
  for (std::size_t k = 1; k < kLatticeSymmetries.size(); ++k) {
    auto form = detail::normalized_form(cells, tokens, kLatticeSymmetries[k]);
    if (form < best) best = std::move(form);
  }

  std::uint64_t a = 0x243f6a8885a308d3ULL ^ cells.size();
  std::uint64_t b = 0x13198a2e03707344ULL ^ (cells.size() << 17);
  for (const auto& [x, y, t] : best) {
    const std::uint64_t xy = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) << 32) |
                             static_cast<std::uint32_t>(y);
    for (std::uint64_t v : {xy, std::bit_cast<std::uint64_t>(t.mass), std::bit_cast<std::uint64_t>(t.jx),
                            std::bit_cast<std::uint64_t>(t.jy), std::bit_cast<std::uint64_t>(t.jz)}) {
      a = detail::absorb(a, v);
      b = detail::absorb(b + 0x9e3779b97f4a7c15ULL, v ^ 0xa4093822299f31d0ULL);
    }
  }
  return {a, b};
}

inline CanonicalKey canonical_key(const Aim& aim, const Roster& roster) {
  MODSTRUCT_REQUIRE(static_cast<int>(roster.size()) == aim.size(), ErrorCode::InvalidInput,
                    "roster size does not match AIM size");
  return canonical_key(place_on_grid(aim), roster);
}

}  // namespace modstruct
