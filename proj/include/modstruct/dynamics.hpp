#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "modstruct/error.hpp"
#include "modstruct/layout.hpp"

namespace modstruct {

using Matrix3Xd = Eigen::Matrix<double, 3, Eigen::Dynamic>;
using Matrix6Xd = Eigen::Matrix<double, 6, Eigen::Dynamic>;

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  // clang-format off
  s <<     0, -v.z(),  v.y(),
       v.z(),      0, -v.x(),
      -v.y(),  v.x(),      0;
  // clang-format on
  return s;
}

/// Total structure inertia about the mass centre: module inertias plus the
/// point-mass terms of every centered position.
inline Eigen::Matrix3d inertia_total(const LayoutConfiguration& layout) {
  Eigen::Matrix3d js = Eigen::Matrix3d::Zero();
  for (int i = 0; i < layout.size(); ++i) {
    const auto& spec = layout.roster[static_cast<std::size_t>(i)];
    const double x = layout.positions[static_cast<std::size_t>(i)].x();
    const double y = layout.positions[static_cast<std::size_t>(i)].y();
    js.diagonal() += spec.inertia_diag;
    js(0, 0) += spec.mass * y * y;
    js(1, 1) += spec.mass * x * x;
    js(2, 2) += spec.mass * (x * x + y * y);
    js(0, 1) -= spec.mass * x * y;
  }
  js(1, 0) = js(0, 1);
  return js;
}

/// J_S^{-1} [skew(d_1) ... skew(d_n)], the map from decomposed module forces
/// to angular acceleration.
inline Matrix3Xd d_bar(const LayoutConfiguration& layout) {
  const Eigen::Matrix3d js = inertia_total(layout);
  const double scale = js.trace() / 3.0;
  MODSTRUCT_REQUIRE(scale > 0.0 && js.determinant() / (scale * scale * scale) >= 1e-12, ErrorCode::SingularInertia,
                    "total inertia is numerically singular");
  const Eigen::Matrix3d js_inv = js.inverse();
  Matrix3Xd out(3, 3 * layout.size());
  for (int i = 0; i < layout.size(); ++i) {
    out.middleCols<3>(3 * i) = js_inv * skew(layout.positions[static_cast<std::size_t>(i)]);
  }
  return out;
}

/// Square roots of the eigenvalues of a symmetric positive semi-definite 3x3
/// matrix, descending. Closed-form trigonometric solve followed by Newton
/// polishing on the characteristic polynomial.
inline Eigen::Vector3d sqrt_eigenvalues_psd(const Eigen::Matrix3d& gram) {
  const double scale = gram.cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) return Eigen::Vector3d::Zero();
  const Eigen::Matrix3d b = gram / scale;

  // Characteristic polynomial  l^3 - c2 l^2 + c1 l - c0.
  const double c2 = b.trace();
  const double c1 = b(0, 0) * b(1, 1) - b(0, 1) * b(1, 0) + b(0, 0) * b(2, 2) - b(0, 2) * b(2, 0) +
                    b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1);
  const double c0 = b.determinant();

  std::array<double, 3> eig{};
  const double off = b(0, 1) * b(0, 1) + b(0, 2) * b(0, 2) + b(1, 2) * b(1, 2);
  const double q = c2 / 3.0;
  const double p2 = (b(0, 0) - q) * (b(0, 0) - q) + (b(1, 1) - q) * (b(1, 1) - q) + (b(2, 2) - q) * (b(2, 2) - q) +
                    2.0 * off;
  if (off == 0.0) {
    eig = {b(0, 0), b(1, 1), b(2, 2)};
  } else if (p2 <= 1e-300) {
    eig = {q, q, q};
  } else {
    const double p = std::sqrt(p2 / 6.0);
    const Eigen::Matrix3d shifted = (b - q * Eigen::Matrix3d::Identity()) / p;
    const double r = std::clamp(shifted.determinant() / 2.0, -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    eig[0] = q + 2.0 * p * std::cos(phi);
    eig[2] = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    eig[1] = 3.0 * q - eig[0] - eig[2];

    for (double& l : eig) {
      for (int it = 0; it < 4; ++it) {
        const double f = ((l - c2) * l + c1) * l - c0;
        const double df = (3.0 * l - 2.0 * c2) * l + c1;
        if (std::abs(df) < 1e-8) break;  // clustered roots: the closed form is already best
        const double next = l - f / df;
        if (!std::isfinite(next) || std::abs(next - l) <= 1e-17 * std::max(1.0, std::abs(l))) break;
        l = next;
      }
    }
  }

  std::sort(eig.begin(), eig.end(), std::greater<>());
  Eigen::Vector3d sigma;
  for (int k = 0; k < 3; ++k) sigma[k] = std::sqrt(std::max(eig[static_cast<std::size_t>(k)], 0.0) * scale);
  return sigma;
}

/// Singular values of a 3xk matrix, descending. One-sided Jacobi on the three
/// rows: no Gram matrix is formed, so small values keep full accuracy.
inline Eigen::Vector3d singular_values_3xk(const Eigen::Ref<const Matrix3Xd>& m) {
  Matrix3Xd w = m;
  constexpr std::array<std::pair<int, int>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (const auto& [i, j] : pairs) {
      const double a = w.row(i).squaredNorm();
      const double b = w.row(j).squaredNorm();
      const double c = w.row(i).dot(w.row(j));
      if (std::abs(c) <= 1e-17 * std::sqrt(a * b) || c == 0.0) continue;
      rotated = true;
      const double zeta = (b - a) / (2.0 * c);
      const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
      const double cs = 1.0 / std::hypot(1.0, t);
      const double sn = cs * t;
      const Eigen::RowVectorXd ri = w.row(i);
      w.row(i) = cs * ri - sn * w.row(j);
      w.row(j) = sn * ri + cs * w.row(j);
    }
    if (!rotated) break;
  }
  Eigen::Vector3d sigma(w.row(0).norm(), w.row(1).norm(), w.row(2).norm());
  std::sort(sigma.data(), sigma.data() + 3, std::greater<>());
  return sigma;
}

struct FitnessParams {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double rank_tolerance = 1e-9;  // sigma_min / sigma_max below this is rank-deficient

  void validate() const {
    MODSTRUCT_REQUIRE(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda1 + lambda2 > 0.0, ErrorCode::InvalidParams,
                      "fitness weights must be non-negative with a positive sum");
    MODSTRUCT_REQUIRE(rank_tolerance >= 0.0 && rank_tolerance < 1.0, ErrorCode::InvalidParams,
                      "rank tolerance must lie in [0, 1)");
  }
};

// -inf marks an under-actuated structure. Ordering uses `value` only; -inf
// ties are broken by the caller (insertion order).
struct FitnessValue {
  double value = -std::numeric_limits<double>::infinity();
  double cond_term = std::numeric_limits<double>::infinity();   // cond(D_bar)
  double sigma_term = std::numeric_limits<double>::infinity();  // sigma_max(pinv(D_bar))^2

  bool finite() const noexcept { return std::isfinite(value); }
};

inline bool is_rank_deficient(const Eigen::Vector3d& sigma, double tolerance) {
  return !(sigma[0] > 0.0) || sigma[2] < tolerance * sigma[0];
}

inline int numeric_rank(const Eigen::Vector3d& sigma, double tolerance) {
  if (!(sigma[0] > 0.0)) return 0;
  int r = 0;
  for (int k = 0; k < 3; ++k) r += sigma[k] >= tolerance * sigma[0] ? 1 : 0;
  return r;
}

inline FitnessValue fitness_from_sigma(const Eigen::Vector3d& sigma, const FitnessParams& params) {
  FitnessValue f;
  if (is_rank_deficient(sigma, params.rank_tolerance)) return f;
  f.cond_term = sigma[0] / sigma[2];
  f.sigma_term = 1.0 / (sigma[2] * sigma[2]);
  f.value = -params.lambda1 * f.cond_term - params.lambda2 * f.sigma_term;
  return f;
}

/// -lambda1 cond(D_bar) - lambda2 sigma_max(pinv(D_bar))^2, or -inf when
/// D_bar loses rank.
inline FitnessValue fitness(const LayoutConfiguration& layout, const FitnessParams& params = {}) {
  return fitness_from_sigma(singular_values_3xk(d_bar(layout)), params);
}

/// Singular values of D_bar straight from a lattice placement, without
/// materialising the 3x3n matrix: D_bar D_bar^T = J^-1 (sum skew(d) skew(d)^T) J^-1.
/// Centering matches layout_from_cells.
inline Eigen::Vector3d d_bar_sigma_from_cells(const std::vector<Cell>& cells, const Roster& roster,
                                              double edge_length) {
  double mass = 0.0;
  double wx = 0.0;
  double wy = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    mass += roster[i].mass;
    wx += roster[i].mass * cells[i].x;
    wy += roster[i].mass * cells[i].y;
  }
  const double cx = wx / mass;
  const double cy = wy / mass;
  double rx = 0.0;
  double ry = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    rx += roster[i].mass * ((cells[i].x - cx) * edge_length);
    ry += roster[i].mass * ((cells[i].y - cy) * edge_length);
  }
  rx /= mass;
  ry /= mass;

  Eigen::Matrix3d js = Eigen::Matrix3d::Zero();
  Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& spec = roster[i];
    const double x = (cells[i].x - cx) * edge_length - rx;
    const double y = (cells[i].y - cy) * edge_length - ry;
    js.diagonal() += spec.inertia_diag;
    js(0, 0) += spec.mass * y * y;
    js(1, 1) += spec.mass * x * x;
    js(2, 2) += spec.mass * (x * x + y * y);
    js(0, 1) -= spec.mass * x * y;
    gram(0, 0) += y * y;
    gram(1, 1) += x * x;
    gram(2, 2) += x * x + y * y;
    gram(0, 1) -= x * y;
  }
  js(1, 0) = js(0, 1);
  gram(1, 0) = gram(0, 1);
  const Eigen::Matrix3d js_inv = js.inverse();
  return sqrt_eigenvalues_psd(js_inv * gram * js_inv);
}

/// Upper bound on the squared thrust norm needed for a pure angular
/// acceleration `omega_dot`, ignoring the gyroscopic term.
inline double thrust_energy_bound(const LayoutConfiguration& layout, const Eigen::Vector3d& omega_dot,
                                  const FitnessParams& params = {}) {
  const Eigen::Vector3d sigma = singular_values_3xk(d_bar(layout));
  MODSTRUCT_REQUIRE(!is_rank_deficient(sigma, params.rank_tolerance), ErrorCode::RankDeficient,
                    "D_bar has rank below 3");
  return omega_dot.squaredNorm() / (sigma[2] * sigma[2]);
}

/// P_bar = [I ... I; skew(d_1) ... skew(d_n)], the constant map from the
/// stacked decomposed forces to the body wrench.
inline Matrix6Xd allocation_matrix(const LayoutConfiguration& layout) {
  Matrix6Xd p(6, 3 * layout.size());
  for (int i = 0; i < layout.size(); ++i) {
    p.block<3, 3>(0, 3 * i).setIdentity();
    p.block<3, 3>(3, 3 * i) = skew(layout.positions[static_cast<std::size_t>(i)]);
  }
  return p;
}

inline int allocation_rank(const LayoutConfiguration& layout, double tolerance = 1e-9) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(allocation_matrix(layout));
  const auto& s = svd.singularValues();
  if (s.size() == 0 || !(s[0] > 0.0)) return 0;
  int r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) r += s[k] >= tolerance * s[0] ? 1 : 0;
  return r;
}

// Everything the evaluator knows about one structure.
struct StructureDynamics {
  Eigen::Matrix3d inertia_total;
  Matrix3Xd d_bar;
  Eigen::Vector3d sigma;
  Matrix6Xd allocation;
  FitnessValue fitness;
  int rank = 0;
};

inline StructureDynamics analyze(const LayoutConfiguration& layout, const FitnessParams& params = {}) {
  StructureDynamics s;
  s.inertia_total = inertia_total(layout);
  s.d_bar = d_bar(layout);
  s.sigma = singular_values_3xk(s.d_bar);
  s.allocation = allocation_matrix(layout);
  s.fitness = fitness_from_sigma(s.sigma, params);
  s.rank = numeric_rank(s.sigma, params.rank_tolerance);
  return s;
}

}  // namespace modstruct
