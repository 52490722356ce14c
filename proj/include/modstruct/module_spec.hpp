#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "modstruct/error.hpp"

namespace modstruct {

// One thrust-generator module. Inertia is diagonal in the module frame, which
// is aligned with the structure frame.
struct ModuleSpec {
  int id = 0;
  double mass = 0.0;                                    // kg
  Eigen::Vector3d inertia_diag = Eigen::Vector3d::Zero();  // kg*m^2

  bool operator==(const ModuleSpec&) const = default;
};

using Roster = std::vector<ModuleSpec>;

/// Throws InvalidInput unless every module has positive mass and inertia and
/// ids run 1..n in order.
inline void validate_roster(const Roster& roster) {
  MODSTRUCT_REQUIRE(!roster.empty(), ErrorCode::InvalidInput, "roster is empty");
  std::vector<bool> seen(roster.size() + 1, false);
  for (const auto& m : roster) {
    const std::string who = "module " + std::to_string(m.id);
    MODSTRUCT_REQUIRE(m.id >= 1 && m.id <= static_cast<int>(roster.size()), ErrorCode::InvalidInput,
                      who + ": id outside 1.." + std::to_string(roster.size()));
    MODSTRUCT_REQUIRE(!seen[m.id], ErrorCode::InvalidInput, who + ": duplicate id");
    seen[m.id] = true;
    MODSTRUCT_REQUIRE(m.mass > 0.0, ErrorCode::InvalidInput, who + ": mass must be positive");
    MODSTRUCT_REQUIRE((m.inertia_diag.array() > 0.0).all(), ErrorCode::InvalidInput,
                      who + ": inertia entries must be positive");
  }
  for (std::size_t i = 0; i < roster.size(); ++i) {
    MODSTRUCT_REQUIRE(roster[i].id == static_cast<int>(i) + 1, ErrorCode::InvalidInput,
                      "roster must be ordered by id starting at 1");
  }
}

inline Roster identical_roster(int n, double mass, double inertia) {
  Roster r;
  r.reserve(static_cast<std::size_t>(n));
  for (int i = 1; i <= n; ++i) r.push_back({i, mass, Eigen::Vector3d::Constant(inertia)});
  return r;
}

inline double total_mass(const Roster& roster) {
  double m = 0.0;
  for (const auto& s : roster) m += s.mass;
  return m;
}

}  // namespace modstruct
