#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "modstruct/canonical.hpp"
#include "modstruct/dynamics.hpp"
#include "modstruct/error.hpp"
#include "modstruct/ga.hpp"
#include "modstruct/lattice.hpp"
#include "modstruct/layout.hpp"
#include "modstruct/parallel.hpp"

namespace modstruct {

struct EnumerationResult {
  int n = 0;
  std::uint64_t count_raw = 0;        // labeled placements up to translation
  std::uint64_t count_canonical = 0;  // classes up to translation, rotation and reflection
  std::uint64_t shapes = 0;           // free polyominoes of size n
  Individual best;
  double wall_time = 0.0;  // seconds
};

namespace detail {

using Shape = std::vector<Cell>;  // sorted, translated so min x = min y = 0

inline Shape normalize_shape(Shape cells) {
  int mx = std::numeric_limits<int>::max();
  int my = std::numeric_limits<int>::max();
  for (const Cell& c : cells) {
    mx = std::min(mx, c.x);
    my = std::min(my, c.y);
  }
  for (Cell& c : cells) c = {c.x - mx, c.y - my};
  std::sort(cells.begin(), cells.end());
  return cells;
}

inline Shape transform_shape(const Shape& s, const LatticeSymmetry& g) {
  Shape out;
  out.reserve(s.size());
  for (const Cell& c : s) out.push_back(g.apply(c));
  return normalize_shape(std::move(out));
}

inline Shape canonical_shape(const Shape& s) {
  Shape best = transform_shape(s, kLatticeSymmetries[0]);
  for (std::size_t k = 1; k < kLatticeSymmetries.size(); ++k) best = std::min(best, transform_shape(s, kLatticeSymmetries[k]));
  return best;
}

}  // namespace detail

/// Free polyominoes with `n` cells (one representative per class under the
/// lattice symmetries), grown one cell at a time with canonical dedup.
inline std::vector<std::vector<Cell>> free_polyominoes(int n) {
  MODSTRUCT_REQUIRE(n >= 1, ErrorCode::InvalidInput, "polyomino size must be >= 1");
  std::set<detail::Shape> level{{Cell{0, 0}}};
  for (int k = 1; k < n; ++k) {
    std::set<detail::Shape> next;
    for (const auto& shape : level) {
      std::set<Cell> occupied(shape.begin(), shape.end());
      for (const Cell& c : shape) {
        for (int f = 0; f < kFaces; ++f) {
          const Cell nb = c + face_offset(f);
          if (occupied.count(nb)) continue;
          detail::Shape grown = shape;
          grown.push_back(nb);
          next.insert(detail::canonical_shape(grown));
        }
      }
    }
    level = std::move(next);
  }
  return {level.begin(), level.end()};
}

namespace detail {

// Per-shape symmetry data: the stabiliser as slot permutations.
struct ShapeSymmetry {
  std::vector<std::pair<LatticeSymmetry, std::vector<int>>> stabilizer;  // excludes identity
  int orbit_size = 8;
};

// `allow_swap` false restricts the group to the four symmetries that keep
// the x and y axes apart.
inline ShapeSymmetry shape_symmetry(const Shape& shape, bool allow_swap = true) {
  ShapeSymmetry sym;
  int stab = 1;
  for (std::size_t k = 1; k < kLatticeSymmetries.size(); ++k) {
    const auto& g = kLatticeSymmetries[k];
    if (g.swap_xy && !allow_swap) continue;
    if (transform_shape(shape, g) != shape) continue;
    ++stab;
    // Image of each slot under g, after re-normalisation.
    Shape moved;
    for (const Cell& c : shape) moved.push_back(g.apply(c));
    int mx = std::numeric_limits<int>::max();
    int my = std::numeric_limits<int>::max();
    for (const Cell& c : moved) {
      mx = std::min(mx, c.x);
      my = std::min(my, c.y);
    }
    std::vector<int> perm(shape.size());
    for (std::size_t i = 0; i < moved.size(); ++i) {
      const Cell t{moved[i].x - mx, moved[i].y - my};
      perm[i] = static_cast<int>(std::lower_bound(shape.begin(), shape.end(), t) - shape.begin());
    }
    sym.stabilizer.emplace_back(g, std::move(perm));
  }
  sym.orbit_size = (allow_swap ? 8 : 4) / stab;
  return sym;
}

// Modules grouped by physical identity.
struct TokenClasses {
  std::vector<ModuleToken> tokens;             // class -> token, ascending
  std::vector<std::vector<int>> members;       // class -> module ids, ascending
  std::vector<int> sorted_labels;              // multiset of class ids, ascending
  std::vector<int> swapped;                    // class -> class of its axis-swapped token, or -1
  bool swap_preserves_multiset = true;
};

inline TokenClasses token_classes(const Roster& roster) {
  TokenClasses tc;
  std::map<ModuleToken, std::vector<int>> groups;
  for (const auto& s : roster) groups[ModuleToken::of(s)].push_back(s.id);
  for (auto& [tok, ids] : groups) {
    tc.tokens.push_back(tok);
    tc.members.push_back(ids);
  }
  for (std::size_t c = 0; c < tc.members.size(); ++c) {
    for (std::size_t k = 0; k < tc.members[c].size(); ++k) tc.sorted_labels.push_back(static_cast<int>(c));
  }
  const LatticeSymmetry swap{true, 1, 1};
  for (std::size_t c = 0; c < tc.tokens.size(); ++c) {
    const auto t = tc.tokens[c].transformed(swap);
    const auto it = std::lower_bound(tc.tokens.begin(), tc.tokens.end(), t);
    const bool found = it != tc.tokens.end() && *it == t;
    const int to = found ? static_cast<int>(it - tc.tokens.begin()) : -1;
    tc.swapped.push_back(to);
    if (!found || tc.members[static_cast<std::size_t>(to)].size() != tc.members[c].size()) tc.swap_preserves_multiset = false;
  }
  return tc;
}

inline std::uint64_t multinomial(const TokenClasses& tc) {
  std::uint64_t total = 1;
  std::uint64_t placed = 0;
  for (const auto& m : tc.members) {
    for (std::uint64_t k = 1; k <= m.size(); ++k) {
      ++placed;
      total = total * placed / k;
    }
  }
  return total;
}

// True iff `labels` is the smallest labeling in its orbit under the shape's
// stabiliser (restricted to images that use the roster's own modules).
inline bool is_orbit_minimal(const std::vector<int>& labels, const ShapeSymmetry& sym, const TokenClasses& tc,
                             std::vector<int>& scratch) {
  for (const auto& [g, perm] : sym.stabilizer) {
    if (g.swap_xy && !tc.swap_preserves_multiset) continue;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int c = labels[i];
      scratch[static_cast<std::size_t>(perm[i])] = g.swap_xy ? tc.swapped[static_cast<std::size_t>(c)] : c;
    }
    if (scratch < labels) return false;
  }
  return true;
}

struct Candidate {
  double value = -std::numeric_limits<double>::infinity();
  std::size_t shape = std::numeric_limits<std::size_t>::max();
  std::vector<int> labels;
  bool found = false;
};

inline bool better(const Candidate& a, const Candidate& b) {
  if (!b.found) return a.found;
  if (!a.found) return false;
  if (a.value != b.value) return a.value > b.value;
  if (a.shape != b.shape) return a.shape < b.shape;
  return a.labels < b.labels;
}

}  // namespace detail

/// Visits every connected lattice placement of the roster exactly once per
/// canonical class and returns the fittest. Shapes are shared out across
/// `threads` workers; the result does not depend on the worker count.
inline EnumerationResult enumerate_all(const Roster& roster, double edge_length, const FitnessParams& fit,
                                       int n_cap = 8, int threads = 1) {
  validate_roster(roster);
  fit.validate();
  const int n = static_cast<int>(roster.size());
  MODSTRUCT_REQUIRE(n <= n_cap, ErrorCode::TooLarge,
                    "n = " + std::to_string(n) + " exceeds the enumeration cap n_cap = " + std::to_string(n_cap));
  const auto started = std::chrono::steady_clock::now();

  const auto tc = detail::token_classes(roster);
  // Without the axis swap a shape and its transpose are different placements
  // unless some non-swapping symmetry already maps one onto the other.
  auto shapes = free_polyominoes(n);
  if (!tc.swap_preserves_multiset) {
    const LatticeSymmetry swap{true, 1, 1};
    const std::size_t free_count = shapes.size();
    for (std::size_t s = 0; s < free_count; ++s) {
      const auto t = detail::transform_shape(shapes[s], swap);
      bool same = false;
      for (const auto& g : kLatticeSymmetries) same = same || (!g.swap_xy && detail::transform_shape(t, g) == shapes[s]);
      if (!same) shapes.push_back(t);
    }
  }
  const std::uint64_t labelings = detail::multinomial(tc);

  struct Partial {
    std::uint64_t raw = 0;
    std::uint64_t canonical = 0;
    detail::Candidate best;
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(shapes.size())));
  std::vector<Partial> partial(static_cast<std::size_t>(workers));

  parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t w) {
    Partial& out = partial[w];
    std::vector<Cell> cells(static_cast<std::size_t>(n));
    std::vector<int> scratch(static_cast<std::size_t>(n));
    for (std::size_t s = w; s < shapes.size(); s += static_cast<std::size_t>(workers)) {
      const auto& shape = shapes[s];
      const auto sym = detail::shape_symmetry(shape, tc.swap_preserves_multiset);
      out.raw += static_cast<std::uint64_t>(sym.orbit_size) * labelings;
      std::vector<int> labels = tc.sorted_labels;
      do {
        if (!detail::is_orbit_minimal(labels, sym, tc, scratch)) continue;
        ++out.canonical;
        // Slot i of the shape receives the next unused module of class labels[i].
        std::vector<std::size_t> used(tc.members.size(), 0);
        for (std::size_t i = 0; i < labels.size(); ++i) {
          const auto c = static_cast<std::size_t>(labels[i]);
          const int id = tc.members[c][used[c]++];
          cells[static_cast<std::size_t>(id - 1)] = shape[i];
        }
        const double value = fitness_from_sigma(d_bar_sigma_from_cells(cells, roster, edge_length), fit).value;
        detail::Candidate cand{value, s, labels, true};
        if (detail::better(cand, out.best)) out.best = std::move(cand);
      } while (std::next_permutation(labels.begin(), labels.end()));
    }
  });

  EnumerationResult result;
  result.n = n;
  result.shapes = shapes.size();
  detail::Candidate best;
  for (auto& p : partial) {
    result.count_raw += p.raw;
    result.count_canonical += p.canonical;
    if (detail::better(p.best, best)) best = std::move(p.best);
  }

  std::vector<Cell> cells(static_cast<std::size_t>(n));
  std::vector<std::size_t> used(tc.members.size(), 0);
  for (std::size_t i = 0; i < best.labels.size(); ++i) {
    const auto c = static_cast<std::size_t>(best.labels[i]);
    cells[static_cast<std::size_t>(tc.members[c][used[c]++] - 1)] = shapes[best.shape][i];
  }
  // Re-anchor so module 1 sits at the origin, matching pos_tree_search.
  const Cell anchor = cells[0];
  for (Cell& c : cells) c = c - anchor;
  result.best = evaluate_individual(aim_from_cells(cells), EvalContext{roster, edge_length, fit});
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

/// Number of canonical classes for n identical modules.
inline std::uint64_t count_check(int n, int n_cap = 8) {
  MODSTRUCT_REQUIRE(n >= 1, ErrorCode::InvalidInput, "n must be >= 1");
  return enumerate_all(identical_roster(n, 1.0, 0.1), 1.0, FitnessParams{}, n_cap).count_canonical;
}

}  // namespace modstruct
