#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "modstruct/dynamics.hpp"
#include "modstruct/error.hpp"
#include "modstruct/layout.hpp"

namespace modstruct {

// Structure state. Position and velocity are in the world frame, angular
// velocity in the structure frame; attitude is roll-pitch-yaw (Z-Y-X).
struct RigidState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d attitude = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();

  /// World-from-structure rotation.
  Eigen::Matrix3d rotation() const {
    const double cr = std::cos(attitude[0]), sr = std::sin(attitude[0]);
    const double cp = std::cos(attitude[1]), sp = std::sin(attitude[1]);
    const double cy = std::cos(attitude[2]), sy = std::sin(attitude[2]);
    Eigen::Matrix3d r;
    // clang-format off
    r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
         sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
             -sp,                cp * sr,                cp * cr;
    // clang-format on
    return r;
  }
};

inline double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

inline Eigen::Vector3d wrap_angles(const Eigen::Vector3d& a) {
  return {wrap_angle(a[0]), wrap_angle(a[1]), wrap_angle(a[2])};
}

/// Body rates to roll-pitch-yaw rates.
inline Eigen::Matrix3d euler_rate_map(const Eigen::Vector3d& attitude) {
  const double cr = std::cos(attitude[0]), sr = std::sin(attitude[0]);
  const double cp = std::cos(attitude[1]), tp = std::tan(attitude[1]);
  Eigen::Matrix3d e;
  // clang-format off
  e << 1, sr * tp, cr * tp,
       0,      cr,     -sr,
       0, sr / cp, cr / cp;
  // clang-format on
  return e;
}

// Tilt, twist and thrust of one module.
struct ModuleCommand {
  double alpha = 0.0;   // rad
  double beta = 0.0;    // rad
  double thrust = 0.0;  // N
};

inline Eigen::Vector3d module_force(const ModuleCommand& c) {
  return Eigen::Vector3d(std::sin(c.beta), -std::sin(c.alpha) * std::cos(c.beta), std::cos(c.alpha) * std::cos(c.beta)) *
         c.thrust;
}

/// Recovers (alpha, beta, T) from a decomposed module force.
inline ModuleCommand inverse_kinematics(const Eigen::Vector3d& f) {
  const double thrust = f.norm();
  if (thrust < 1e-9) return {};
  // atan2 form of beta = asin(f_x / T); stays accurate near +-pi/2.
  return {std::atan2(-f.y(), f.z()), std::atan2(f.x(), std::hypot(f.y(), f.z())), thrust};
}

/// Constant per-structure quantities used by the simulator.
struct RigidBodyModel {
  double mass = 0.0;
  Eigen::Matrix3d inertia = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d inertia_inv = Eigen::Matrix3d::Identity();
  Matrix6Xd allocation;             // P_bar
  Eigen::MatrixXd allocation_pinv;  // 3n x 6
  int rank = 0;
  double energy_gain = 0.0;  // sigma_max(pinv(D_bar))^2, 0 when D_bar is rank-deficient
  Eigen::Matrix3d d_bar_gram = Eigen::Matrix3d::Zero();  // D_bar D_bar^T

  explicit RigidBodyModel(const LayoutConfiguration& layout, double rank_tolerance = 1e-9) {
    mass = layout.total_mass();
    inertia = inertia_total(layout);
    inertia_inv = inertia.inverse();
    allocation = allocation_matrix(layout);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(allocation, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      if (s[0] > 0.0 && s[k] >= rank_tolerance * s[0]) {
        inv[k] = 1.0 / s[k];
        ++rank;
      }
    }
    allocation_pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    const Matrix3Xd db = d_bar(layout);
    d_bar_gram = db * db.transpose();
    const Eigen::Vector3d sigma = singular_values_3xk(db);
    if (!is_rank_deficient(sigma, rank_tolerance)) energy_gain = 1.0 / (sigma[2] * sigma[2]);
  }
};

/// Minimum-norm decomposed forces producing the body wrench `u` = (force,
/// torque). Throws RankDeficient unless the allocation has full row rank.
inline Eigen::VectorXd allocate(const Eigen::Matrix<double, 6, 1>& u, const RigidBodyModel& model) {
  MODSTRUCT_REQUIRE(model.rank == 6, ErrorCode::RankDeficient,
                    "allocation matrix has rank " + std::to_string(model.rank) + " < 6; a full wrench is not reachable");
  return model.allocation_pinv * u;
}

inline Eigen::VectorXd allocate(const Eigen::Matrix<double, 6, 1>& u, const LayoutConfiguration& layout) {
  return allocate(u, RigidBodyModel(layout));
}

struct StepResult {
  RigidState state;
  bool gimbal_lock_warning = false;  // |pitch| > 1.4 rad
};

/// One fixed RK4 step under constant decomposed forces `forces` (3n, body
/// frame) and signed gravity along world z.
inline StepResult step_dynamics(const RigidState& s, const Eigen::VectorXd& forces, const RigidBodyModel& model,
                                double dt, double gravity = -9.81) {
  const Eigen::Matrix<double, 6, 1> u = model.allocation * forces;
  const Eigen::Vector3d u_force = u.head<3>();
  const Eigen::Vector3d u_torque = u.tail<3>();
  const Eigen::Vector3d g(0.0, 0.0, gravity);

  struct Deriv {
    Eigen::Vector3d dpos, datt, dvel, domega;
  };
  auto deriv = [&](const RigidState& x) {
    Deriv d;
    d.dpos = x.velocity;
    d.dvel = x.rotation() * u_force / model.mass + g;
    d.datt = euler_rate_map(x.attitude) * x.omega;
    d.domega = model.inertia_inv * (u_torque - x.omega.cross(model.inertia * x.omega));
    return d;
  };
  auto advance = [](const RigidState& x, const Deriv& d, double h) {
    RigidState y = x;
    y.position += h * d.dpos;
    y.attitude += h * d.datt;
    y.velocity += h * d.dvel;
    y.omega += h * d.domega;
    return y;
  };

  const Deriv k1 = deriv(s);
  const Deriv k2 = deriv(advance(s, k1, dt / 2));
  const Deriv k3 = deriv(advance(s, k2, dt / 2));
  const Deriv k4 = deriv(advance(s, k3, dt));
  StepResult out;
  out.state = s;
  out.state.position += dt / 6 * (k1.dpos + 2 * k2.dpos + 2 * k3.dpos + k4.dpos);
  out.state.attitude += dt / 6 * (k1.datt + 2 * k2.datt + 2 * k3.datt + k4.datt);
  out.state.velocity += dt / 6 * (k1.dvel + 2 * k2.dvel + 2 * k3.dvel + k4.dvel);
  out.state.omega += dt / 6 * (k1.domega + 2 * k2.domega + 2 * k3.domega + k4.domega);
  out.state.attitude[0] = wrap_angle(out.state.attitude[0]);
  out.state.attitude[2] = wrap_angle(out.state.attitude[2]);
  out.gimbal_lock_warning = std::abs(out.state.attitude[1]) > 1.4;
  return out;
}

inline StepResult step_dynamics(const RigidState& s, const Eigen::VectorXd& forces, const LayoutConfiguration& layout,
                                double dt, double gravity = -9.81) {
  return step_dynamics(s, forces, RigidBodyModel(layout), dt, gravity);
}

// Sinusoidal 6-DOF reference: amplitude * sin(2 pi f t) per axis.
struct Trajectory {
  Eigen::Vector3d position_amplitude = Eigen::Vector3d::Zero();  // m
  Eigen::Vector3d position_frequency = Eigen::Vector3d::Zero();  // Hz
  Eigen::Vector3d attitude_amplitude = Eigen::Vector3d::Zero();  // rad
  Eigen::Vector3d attitude_frequency = Eigen::Vector3d::Zero();  // Hz
  double duration = 10.0;                                        // s

  struct Sample {
    Eigen::Vector3d pos, vel, acc, att, att_rate;
  };

  Sample at(double t) const {
    Sample s;
    for (int k = 0; k < 3; ++k) {
      const double wp = 2.0 * std::numbers::pi * position_frequency[k];
      const double wa = 2.0 * std::numbers::pi * attitude_frequency[k];
      s.pos[k] = position_amplitude[k] * std::sin(wp * t);
      s.vel[k] = position_amplitude[k] * wp * std::cos(wp * t);
      s.acc[k] = -position_amplitude[k] * wp * wp * std::sin(wp * t);
      s.att[k] = attitude_amplitude[k] * std::sin(wa * t);
      s.att_rate[k] = attitude_amplitude[k] * wa * std::cos(wa * t);
    }
    return s;
  }
};

// How the rate loop turns a body-rate error e into torque.
//  effort: decomposed forces F = k D_bar^T e, i.e. torque J D_bar D_bar^T k e.
//          Equal force effort for every structure; directions with small
//          singular values of D_bar respond slowly.
//  torque: torque = k e. Equal torque for every structure; large inertias
//          respond slowly.
enum class RateLoop { effort, torque };

// Cascaded PD gains. The position loop outputs acceleration (scaled by the
// structure mass), the attitude loop outputs a desired body rate.
struct ControllerGains {
  Eigen::Vector3d position_kp = Eigen::Vector3d::Constant(4.0);   // 1/s^2
  Eigen::Vector3d position_kd = Eigen::Vector3d::Constant(4.0);   // 1/s
  Eigen::Vector3d attitude_kp = Eigen::Vector3d::Constant(4.0);   // 1/s
  Eigen::Vector3d rate_kp = Eigen::Vector3d::Constant(400.0);     // effort: N*kg*m*s/rad, torque: N*m*s/rad
  RateLoop rate_loop = RateLoop::effort;
};

struct SimConfig {
  double gravity = -9.81;  // m/s^2 along world z; negative pulls down
  double dt = 1e-3;
  double duration = 10.0;
  ControllerGains gains;
  Trajectory trajectory;
  bool rotation_only = false;  // zero the commanded force; torque commands only
  int record_every = 10;       // steps between recorded samples

  void validate() const {
    MODSTRUCT_REQUIRE(dt > 0.0, ErrorCode::InvalidParams, "dt must be positive");
    MODSTRUCT_REQUIRE(duration >= 0.0, ErrorCode::InvalidParams, "duration must be non-negative");
    MODSTRUCT_REQUIRE(record_every >= 1, ErrorCode::InvalidParams, "record_every must be >= 1");
    MODSTRUCT_REQUIRE((gains.position_kp.array() >= 0).all() && (gains.position_kd.array() >= 0).all() &&
                          (gains.attitude_kp.array() >= 0).all() && (gains.rate_kp.array() >= 0).all(),
                      ErrorCode::InvalidParams, "controller gains must be non-negative");
  }
};

struct SimSample {
  double t = 0.0;
  Eigen::Vector3d position, attitude, position_ref, attitude_ref;
  double thrust_sq = 0.0;  // sum of T_i^2 at this step
};

struct SimResult {
  double pos_rms = 0.0;  // m
  double att_rms = 0.0;  // rad
  double energy = 0.0;   // sum over steps of sum_i T_i^2, N^2
  long long steps = 0;
  long long gimbal_warnings = 0;
  double max_energy_bound_ratio = 0.0;  // rotation_only: max ||T||^2 / (gain ||J^-1 u_torque||^2)
  double max_ik_error = 0.0;            // worst ||F_i - F(alpha, beta, T)||
  std::vector<SimSample> samples;
};

/// Closed-loop tracking: PD position loop with gravity feed-forward, PD
/// attitude loop cascaded into a proportional rate loop, min-norm allocation,
/// per-module inverse kinematics, RK4 plant.
inline SimResult track(const LayoutConfiguration& layout, const SimConfig& config) {
  config.validate();
  const RigidBodyModel model(layout);
  MODSTRUCT_REQUIRE(model.rank == 6, ErrorCode::RankDeficient,
                    "structure is not over-actuated (allocation rank " + std::to_string(model.rank) + ")");
  const int n = layout.size();
  const auto& gains = config.gains;
  const Eigen::Vector3d g(0.0, 0.0, config.gravity);

  SimResult result;
  RigidState state;
  const auto steps = static_cast<long long>(std::llround(config.duration / config.dt));
  double pos_sq = 0.0;
  double att_sq = 0.0;
  for (long long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * config.dt;
    const auto ref = config.trajectory.at(t);
    const Eigen::Matrix3d r = state.rotation();

    Eigen::Matrix<double, 6, 1> u;
    if (config.rotation_only) {
      u.head<3>().setZero();
    } else {
      const Eigen::Vector3d acc = ref.acc + gains.position_kp.cwiseProduct(ref.pos - state.position) +
                                  gains.position_kd.cwiseProduct(ref.vel - state.velocity);
      u.head<3>() = r.transpose() * (model.mass * (acc - g));
    }
    const Eigen::Vector3d att_err = wrap_angles(ref.att - state.attitude);
    const Eigen::Vector3d euler_rate_des = ref.att_rate + gains.attitude_kp.cwiseProduct(att_err);
    const Eigen::Vector3d omega_des = euler_rate_map(state.attitude).inverse() * euler_rate_des;
    const Eigen::Vector3d rate_cmd = gains.rate_kp.cwiseProduct(omega_des - state.omega);
    u.tail<3>() = gains.rate_loop == RateLoop::effort ? Eigen::Vector3d(model.inertia * (model.d_bar_gram * rate_cmd))
                                                       : rate_cmd;

    const Eigen::VectorXd forces = allocate(u, model);
    Eigen::VectorXd applied(3 * n);
    double thrust_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d fi = forces.segment<3>(3 * i);
      const ModuleCommand cmd = inverse_kinematics(fi);
      const Eigen::Vector3d back = module_force(cmd);
      result.max_ik_error = std::max(result.max_ik_error, (back - fi).norm());
      applied.segment<3>(3 * i) = back;
      thrust_sq += cmd.thrust * cmd.thrust;
    }
    result.energy += thrust_sq;
    if (config.rotation_only) {
      const double omega_dot_sq = (model.inertia_inv * u.tail<3>()).squaredNorm();
      if (omega_dot_sq > 0.0 && model.energy_gain > 0.0) {
        result.max_energy_bound_ratio = std::max(result.max_energy_bound_ratio, thrust_sq / (model.energy_gain * omega_dot_sq));
      }
    }

    const Eigen::Vector3d pos_err = state.position - ref.pos;
    pos_sq += pos_err.squaredNorm();
    att_sq += att_err.squaredNorm();
    if (k % config.record_every == 0) {
      result.samples.push_back({t, state.position, state.attitude, ref.pos, ref.att, thrust_sq});
    }
    MODSTRUCT_REQUIRE(pos_err.norm() <= 1e3, ErrorCode::Diverged,
                      "position error exceeded 1000 m at t = " + std::to_string(t) + " s");

    const StepResult next = step_dynamics(state, applied, model, config.dt, config.gravity);
    state = next.state;
    if (next.gimbal_lock_warning) ++result.gimbal_warnings;
    ++result.steps;
  }
  if (steps > 0) {
    result.pos_rms = std::sqrt(pos_sq / static_cast<double>(steps));
    result.att_rms = std::sqrt(att_sq / static_cast<double>(steps));
  }
  return result;
}

}  // namespace modstruct
