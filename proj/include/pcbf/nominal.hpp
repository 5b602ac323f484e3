#pragma once

// Nominal (safety-unaware) policies used as the target of the safety filter.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <type_traits>
#include <variant>

#include "pcbf/systems.hpp"

namespace pcbf {

/// u = -kp theta - kd omega.
struct PendulumPd {
  double kp = 3.0;
  double kd = 2.0;
};

/// Position PD -> desired acceleration -> (thrust, small-angle attitude
/// setpoint) -> attitude PD -> torques.
struct QuadrotorPd {
  Eigen::Vector3d waypoint = Eigen::Vector3d::Zero();
  double yaw_ref = 0.0;
  double kp_pos = 1.0;
  double kd_pos = 1.6;
  double max_tilt = 0.5;
  double kp_att = 100.0;
  double kd_att = 20.0;
  double kp_yaw = 25.0;
  double kd_yaw = 10.0;
  double mass = 0.5;
  double gravity = 9.81;
  Eigen::Vector3d inertia{2.3e-3, 2.3e-3, 4.0e-3};
};

/// Always returns the same input (typically a vertex of the input box).
struct ConstantInput {
  Vec u;
};

using NominalPolicy = std::variant<PendulumPd, QuadrotorPd, ConstantInput>;

inline Vec quadrotor_pd_raw(const QuadrotorPd& p, const Eigen::Ref<const Vec>& x) {
  using namespace quad;
  require_dim(x.size(), 12, "quadrotor PD state");
  const Eigen::Vector3d pos = x.segment<3>(X);
  const Eigen::Vector3d vel = x.segment<3>(VX);
  const Eigen::Vector3d acc = p.kp_pos * (p.waypoint - pos) - p.kd_pos * vel;

  const double roll = x(ROLL), pitch = x(PITCH), yaw = x(YAW);
  const double tilt = std::max(std::cos(roll) * std::cos(pitch), 0.2);
  Vec u(4);
  u(0) = p.mass * (p.gravity + acc.z()) / tilt;

  // Small-angle inversion of the horizontal thrust direction at the current yaw.
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double pitch_ref =
      std::clamp((acc.x() * cy + acc.y() * sy) / p.gravity, -p.max_tilt, p.max_tilt);
  const double roll_ref =
      std::clamp((acc.x() * sy - acc.y() * cy) / p.gravity, -p.max_tilt, p.max_tilt);
  double yaw_err = std::remainder(p.yaw_ref - yaw, 2.0 * std::numbers::pi);

  u(1) = p.inertia(0) * (p.kp_att * (roll_ref - roll) - p.kd_att * x(WX));
  u(2) = p.inertia(1) * (p.kp_att * (pitch_ref - pitch) - p.kd_att * x(WY));
  u(3) = p.inertia(2) * (p.kp_yaw * yaw_err - p.kd_yaw * x(WZ));
  return u;
}

/// Nominal input at (x, t), clipped to the input box.
inline Vec nominal_eval(const NominalPolicy& policy, const ControlAffineSystem& sys,
                        const Eigen::Ref<const Vec>& x, double t) {
  (void)t;
  require_dim(x.size(), sys.state_dim(), "nominal_eval state");
  Vec u = std::visit(
      [&](const auto& p) -> Vec {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, PendulumPd>) {
          return Vec::Constant(1, -p.kp * x(0) - p.kd * x(1));
        } else if constexpr (std::is_same_v<P, QuadrotorPd>) {
          return quadrotor_pd_raw(p, x);
        } else {
          return p.u;
        }
      },
      policy);
  require_dim(u.size(), sys.input_dim(), "nominal_eval input");
  return sys.input_box.clip(u);
}

/// Quadrotor PD whose physical constants follow the simulated vehicle.
inline QuadrotorPd quadrotor_pd_for(const QuadrotorParams& params,
                                    const Eigen::Vector3d& waypoint) {
  QuadrotorPd pd;
  pd.waypoint = waypoint;
  pd.mass = params.mass;
  pd.gravity = params.gravity;
  pd.inertia = params.inertia;
  return pd;
}

}  // namespace pcbf
