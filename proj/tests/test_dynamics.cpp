#include <gtest/gtest.h>

#include <array>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "modstruct/dynamics.hpp"
#include "modstruct/tree_ops.hpp"
#include "test_helpers.hpp"

using namespace modstruct;
using namespace modstruct::testing;

namespace {

using Big = boost::multiprecision::cpp_bin_float_50;

// Singular values of a 3xk matrix from cyclic Jacobi on M M^T in 50-digit
// arithmetic. Shares nothing with the library kernel.
std::array<double, 3> jacobi_singular_values(const Matrix3Xd& m) {
  Big a[3][3];
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      Big s = 0;
      for (Eigen::Index k = 0; k < m.cols(); ++k) s += Big(m(r, k)) * Big(m(c, k));
      a[r][c] = s;
    }
  }
  for (int sweep = 0; sweep < 100; ++sweep) {
    Big off = 0;
    for (int p = 0; p < 3; ++p)
      for (int q = p + 1; q < 3; ++q) off += a[p][q] * a[p][q];
    if (off < Big("1e-90")) break;
    for (int p = 0; p < 3; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a[p][q] == 0) continue;
        const Big theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const Big t = (theta >= 0 ? Big(1) : Big(-1)) / (abs(theta) + sqrt(theta * theta + 1));
        const Big c = 1 / sqrt(t * t + 1);
        const Big s = t * c;
        for (int k = 0; k < 3; ++k) {
          const Big akp = a[k][p];
          const Big akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const Big apk = a[p][k];
          const Big aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) {
    const Big v = a[k][k] > 0 ? Big(a[k][k]) : Big(0);
    out[static_cast<std::size_t>(k)] = static_cast<double>(sqrt(v));
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

LayoutConfiguration plus_layout() { return pos_tree_search(plus_aim(), identical_roster(5, 1.0, 0.1), 1.0); }

}  // namespace

TEST(InertiaTotal, SingleModule) {
  Roster r{{1, 2.0, {0.3, 0.4, 0.5}}};
  const auto lay = pos_tree_search(Aim(1), r, 1.0);
  EXPECT_TRUE(inertia_total(lay).isApprox(Eigen::Vector3d(0.3, 0.4, 0.5).asDiagonal().toDenseMatrix(), 0.0));
}

TEST(InertiaTotal, PlusShape) {
  const Eigen::Matrix3d js = inertia_total(plus_layout());
  const Eigen::Matrix3d want = Eigen::Vector3d(2.5, 2.5, 4.5).asDiagonal();
  EXPECT_LE((js - want).norm(), 1e-14);
}

TEST(InertiaTotal, TwoModules) {
  const Eigen::Matrix3d js = inertia_total(pos_tree_search(chain_aim(2), identical_roster(2, 1.0, 0.1), 1.0));
  const Eigen::Matrix3d want = Eigen::Vector3d(0.2, 0.7, 0.7).asDiagonal();
  EXPECT_LE((js - want).norm(), 1e-14);
}

TEST(InertiaTotal, SymmetricPositiveDefiniteAndDirectFormula) {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 10));
    const Roster roster = random_roster(n, rng, false);
    const auto lay = pos_tree_search(random_tree(n, rng), roster, rng.uniform(0.2, 2.0));
    const Eigen::Matrix3d js = inertia_total(lay);
    EXPECT_LE((js - js.transpose()).norm(), 0.0);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(js).eigenvalues().minCoeff(), 0.0);
    // zz = xx + yy minus the per-module (Jx + Jy - Jz) excess
    double excess = 0.0;
    for (const auto& m : roster) excess += m.inertia_diag.x() + m.inertia_diag.y() - m.inertia_diag.z();
    EXPECT_NEAR(js(2, 2), js(0, 0) + js(1, 1) - excess, 1e-12 * js(2, 2));
  }
}

TEST(DBar, SingleModuleIsZero) {
  const auto lay = pos_tree_search(Aim(1), identical_roster(1, 1.0, 0.1), 1.0);
  EXPECT_TRUE(d_bar(lay).isZero(0.0));
}

TEST(DBar, TwoChainHasZeroXRow) {
  const auto lay = pos_tree_search(chain_aim(2), identical_roster(2, 1.0, 0.1), 1.0);
  const Matrix3Xd d = d_bar(lay);
  EXPECT_TRUE(d.row(0).isZero(0.0));
}

TEST(DBar, PlusGramIsDiagonal) {
  const Matrix3Xd d = d_bar(plus_layout());
  const Eigen::Matrix3d g = d * d.transpose();
  const Eigen::Matrix3d want = Eigen::Vector3d(2.0 / 6.25, 2.0 / 6.25, 4.0 / 20.25).asDiagonal();
  EXPECT_LE((g - want).norm(), 1e-15);
}

TEST(SingularValues, Examples) {
  Matrix3Xd m = Matrix3Xd::Zero(3, 6);
  m.leftCols<3>().setIdentity();
  EXPECT_LE((singular_values_3xk(m) - Eigen::Vector3d(1, 1, 1)).norm(), 1e-15);

  Matrix3Xd d = Matrix3Xd::Zero(3, 4);
  d(0, 0) = 1;
  d(1, 2) = 3;
  d(2, 1) = 2;
  EXPECT_LE((singular_values_3xk(d) - Eigen::Vector3d(3, 2, 1)).norm(), 1e-14);

  const Eigen::Vector3d s = singular_values_3xk(d_bar(plus_layout()));
  EXPECT_NEAR(s[0], std::sqrt(0.32), 1e-15);
  EXPECT_NEAR(s[1], std::sqrt(0.32), 1e-15);
  EXPECT_NEAR(s[2], std::sqrt(4.0 / 20.25), 1e-15);
  EXPECT_NEAR(s[2], 0.444444, 1e-6);
}

TEST(SingularValues, ZeroMatrix) { EXPECT_TRUE(singular_values_3xk(Matrix3Xd::Zero(3, 5)).isZero(0.0)); }

TEST(SingularValues, MatchesHighPrecisionOracle) {
  Rng rng(97);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto k = static_cast<Eigen::Index>(rng.uniform_int(1, 30));
    Matrix3Xd m(3, k);
    const double scale = std::pow(10.0, rng.uniform(-3.0, 3.0));
    for (Eigen::Index c = 0; c < k; ++c)
      for (int r = 0; r < 3; ++r) m(r, c) = scale * rng.normal();
    if (trial % 5 == 0 && k >= 3) m.row(2) = 0.5 * m.row(0) + 0.25 * m.row(1);  // exact rank 2 in real arithmetic is not exact in floats
    const Eigen::Vector3d got = singular_values_3xk(m);
    const auto want = jacobi_singular_values(m);
    for (int i = 0; i < 3; ++i) {
      // Relative to the largest singular value: that is the accuracy a 3x3
      // Gram-based kernel can deliver and what the fitness terms need.
      const double err = std::abs(got[i] - want[static_cast<std::size_t>(i)]) / want[0];
      worst = std::max(worst, err);
      ASSERT_LE(err, 1e-10) << "trial " << trial << " index " << i;
    }
    ASSERT_GE(got[0], got[1]);
    ASSERT_GE(got[1], got[2]);
    ASSERT_GE(got[2], 0.0);
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

TEST(SingularValues, WellSeparatedValuesAreRelativelyAccurate) {
  // Per-value relative accuracy on matrices whose smallest singular value is
  // not tiny compared to the largest.
  Rng rng(98);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto k = static_cast<Eigen::Index>(rng.uniform_int(3, 20));
    Matrix3Xd m(3, k);
    for (Eigen::Index c = 0; c < k; ++c)
      for (int r = 0; r < 3; ++r) m(r, c) = rng.normal();
    const auto want = jacobi_singular_values(m);
    if (want[2] < 1e-2 * want[0]) continue;
    const Eigen::Vector3d got = singular_values_3xk(m);
    for (int i = 0; i < 3; ++i) ASSERT_LE(std::abs(got[i] - want[static_cast<std::size_t>(i)]), 1e-10 * want[static_cast<std::size_t>(i)]);
  }
}

TEST(Fitness, ChainsAreMinusInfinity) {
  for (int n = 2; n <= 12; ++n) {
    const auto f = fitness(pos_tree_search(chain_aim(n), identical_roster(n, 1.0, 0.1), 1.0));
    EXPECT_TRUE(std::isinf(f.value) && f.value < 0) << n;
  }
}

TEST(Fitness, CollinearRandomRostersAreMinusInfinity) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    Rng chain_rng = rng.split(static_cast<std::uint64_t>(trial));
    const auto lay = pos_tree_search(random_chain(n, chain_rng), random_roster(n, rng, false), rng.uniform(0.2, 3.0));
    const auto s = singular_values_3xk(d_bar(lay));
    EXPECT_TRUE(is_rank_deficient(s, 1e-9));
    EXPECT_EQ(fitness(lay).value, -std::numeric_limits<double>::infinity());
  }
}

TEST(Fitness, PlusGolden) {
  const auto f = fitness(plus_layout());
  EXPECT_NEAR(f.cond_term, std::sqrt(0.32) / (2.0 / 4.5), 1e-14);
  EXPECT_NEAR(f.sigma_term, 5.0625, 1e-13);
  EXPECT_NEAR(f.value, -6.335292, 1e-5);
  EXPECT_NEAR(f.value, -(std::sqrt(0.32) * 2.25) - 5.0625, 1e-13);
}

TEST(Fitness, WeightsApply) {
  FitnessParams p;
  p.lambda1 = 0.0;
  p.lambda2 = 2.0;
  EXPECT_NEAR(fitness(plus_layout(), p).value, -10.125, 1e-12);
  p.lambda1 = -1.0;
  EXPECT_THROW(p.validate(), Error);
  p.lambda1 = 0.0;
  p.lambda2 = 0.0;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Fitness, SingleModuleIsMinusInfinity) {
  const auto lay = pos_tree_search(Aim(1), identical_roster(1, 1.0, 0.1), 1.0);
  EXPECT_TRUE(singular_values_3xk(d_bar(lay)).isZero(0.0));
  EXPECT_EQ(fitness(lay).value, -std::numeric_limits<double>::infinity());
}

TEST(Fitness, InvariantUnderLatticeSymmetries) {
  Rng rng(61);
  int checked = 0;
  for (int trial = 0; trial < 1200; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(3, 10));
    const Roster roster = random_roster(n, rng, true);
    const double l = rng.uniform(0.3, 2.0);
    const auto cells = place_on_grid(random_tree(n, rng));
    const auto base = layout_from_cells(cells, roster, l);
    const Eigen::Vector3d s0 = singular_values_3xk(d_bar(base));
    const double f0 = fitness(base).value;
    for (const auto& g : kLatticeSymmetries) {
      std::vector<Cell> moved;
      for (const Cell& c : cells) moved.push_back(g.apply(c));
      const auto lay = layout_from_cells(moved, roster, l);
      const Eigen::Vector3d s = singular_values_3xk(d_bar(lay));
      for (int i = 0; i < 3; ++i) ASSERT_LE(std::abs(s[i] - s0[i]), 1e-9 * s0[0]);
      const double f = fitness(lay).value;
      if (std::isfinite(f0)) {
        ASSERT_LE(std::abs(f - f0), 1e-9 * std::abs(f0));
      } else {
        ASSERT_EQ(f, f0);
      }
    }
    ++checked;
  }
  EXPECT_GE(checked, 1000);
}

TEST(Fitness, AnisotropicInvariantUnderHalfTurnsAndAxisFlips) {
  Rng rng(62);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(3, 9));
    const Roster roster = random_roster(n, rng, false);
    const auto cells = place_on_grid(random_tree(n, rng));
    const double f0 = fitness(layout_from_cells(cells, roster, 1.0)).value;
    for (const auto& g : kLatticeSymmetries) {
      if (g.swap_xy) continue;
      std::vector<Cell> moved;
      for (const Cell& c : cells) moved.push_back(g.apply(c));
      const double f = fitness(layout_from_cells(moved, roster, 1.0)).value;
      if (std::isfinite(f0)) {
        ASSERT_LE(std::abs(f - f0), 1e-9 * std::abs(f0));
      } else {
        ASSERT_EQ(f, f0);
      }
    }
  }
}

TEST(Fitness, TermsAreConsistent) {
  Rng rng(63);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(4, 10));
    const auto lay = pos_tree_search(random_tree(n, rng), random_roster(n, rng, false), 1.0);
    const Matrix3Xd d = d_bar(lay);
    const Eigen::Vector3d s = singular_values_3xk(d);
    if (is_rank_deficient(s, 1e-9)) continue;
    // sigma_max of the pseudo-inverse times sigma_min of D_bar is one.
    const Eigen::MatrixXd pinv = Eigen::MatrixXd(d).completeOrthogonalDecomposition().pseudoInverse();
    const double pinv_max = Eigen::JacobiSVD<Eigen::MatrixXd>(pinv).singularValues()[0];
    EXPECT_NEAR(pinv_max * s[2], 1.0, 1e-9);
    const auto f = fitness(lay);
    EXPECT_NEAR(f.sigma_term, pinv_max * pinv_max, 1e-9 * f.sigma_term);
  }
}

TEST(Fitness, FastRouteMatchesExplicitDBar) {
  Rng rng(64);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 12));
    const Roster roster = random_roster(n, rng, false);
    const double l = rng.uniform(0.3, 2.0);
    const auto cells = place_on_grid(random_tree(n, rng));
    const Eigen::Vector3d fast = d_bar_sigma_from_cells(cells, roster, l);
    const Eigen::Vector3d slow = singular_values_3xk(d_bar(layout_from_cells(cells, roster, l)));
    for (int i = 0; i < 3; ++i) ASSERT_LE(std::abs(fast[i] - slow[i]), 1e-11 * std::max(slow[0], 1e-300));
  }
}

TEST(Fitness, ContinuousInEdgeLength) {
  Rng rng(65);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(5, 9));
    const Roster roster = random_roster(n, rng, true);
    const auto cells = place_on_grid(random_tree(n, rng));
    const double f0 = fitness(layout_from_cells(cells, roster, 1.0)).value;
    if (!std::isfinite(f0)) continue;
    const double h = 1e-6;
    const double f1 = fitness(layout_from_cells(cells, roster, 1.0 + h)).value;
    EXPECT_LE(std::abs(f1 - f0) / std::abs(f0), 10.0 * h);
  }
}

TEST(ThrustEnergyBound, Examples) {
  const auto lay = plus_layout();
  EXPECT_EQ(thrust_energy_bound(lay, Eigen::Vector3d::Zero()), 0.0);
  EXPECT_NEAR(thrust_energy_bound(lay, Eigen::Vector3d(0, 0, 1)), 5.0625, 1e-12);
  const Eigen::Vector3d w(0.3, -0.2, 0.5);
  EXPECT_NEAR(thrust_energy_bound(lay, 2 * w), 4 * thrust_energy_bound(lay, w), 1e-12);
  try {
    thrust_energy_bound(pos_tree_search(chain_aim(3), identical_roster(3, 1, 0.1), 1.0), w);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
}

TEST(Allocation, Examples) {
  const auto single = pos_tree_search(Aim(1), identical_roster(1, 1.0, 0.1), 1.0);
  Eigen::Matrix<double, 6, 3> want = Eigen::Matrix<double, 6, 3>::Zero();
  want.topRows<3>().setIdentity();
  EXPECT_EQ(allocation_matrix(single), want);
  EXPECT_EQ(allocation_rank(plus_layout()), 6);
  EXPECT_EQ(allocation_rank(pos_tree_search(chain_aim(2), identical_roster(2, 1.0, 0.1), 1.0)), 5);
}

TEST(Allocation, TopBlockIsStackedIdentity) {
  Rng rng(66);
  const int n = 7;
  const auto lay = pos_tree_search(random_tree(n, rng), random_roster(n, rng, false), 1.3);
  const Matrix6Xd p = allocation_matrix(lay);
  for (int i = 0; i < n; ++i) {
    EXPECT_EQ((p.block<3, 3>(0, 3 * i)), Eigen::Matrix3d::Identity());
    EXPECT_EQ((p.block<3, 3>(3, 3 * i)), skew(lay.positions[static_cast<std::size_t>(i)]));
  }
}

TEST(Skew, CrossProduct) {
  const Eigen::Vector3d a(0.3, -1.2, 2.0);
  const Eigen::Vector3d b(-0.7, 0.4, 1.1);
  EXPECT_LE((skew(a) * b - a.cross(b)).norm(), 1e-15);
}
