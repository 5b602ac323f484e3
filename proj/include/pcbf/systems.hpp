#pragma once

// Control-affine dynamics xdot = f(x) + g(x) u with box state and input
// constraints, the two benchmark scenarios and a fixed-step RK4 integrator.

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>

#include "pcbf/common.hpp"

namespace pcbf {

/// Axis-aligned box [lo_i, hi_i] per dimension.
struct Box {
  Vec lo;
  Vec hi;

  Box() = default;
  Box(Vec lower, Vec upper) : lo(std::move(lower)), hi(std::move(upper)) {
    require_dim(hi.size(), lo.size(), "Box bounds");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
      if (!std::isfinite(lo(i)) || !std::isfinite(hi(i))) {
        throw std::invalid_argument("Box: unbounded interval in dimension " +
                                    std::to_string(i));
      }
      if (lo(i) > hi(i)) {
        throw std::invalid_argument("Box: empty interval in dimension " +
                                    std::to_string(i));
      }
    }
  }

  /// Symmetric box [-r_i, r_i].
  static Box symmetric(const Vec& radius) { return {-radius, radius}; }

  int dim() const { return static_cast<int>(lo.size()); }
  Vec extent() const { return hi - lo; }
  Vec center() const { return 0.5 * (lo + hi); }
  double volume() const { return extent().prod(); }

  bool contains(const Eigen::Ref<const Vec>& x, double tol = 0.0) const {
    return ((x - lo).array() >= -tol).all() && ((hi - x).array() >= -tol).all();
  }
  Vec clip(const Eigen::Ref<const Vec>& x) const {
    return x.cwiseMax(lo).cwiseMin(hi);
  }
};

/// All 2^m corners of an input box, one per column. Ordered
/// lexicographically with the low endpoint first and dimension 0 varying
/// slowest, so [0,1]^2 gives (0,0), (0,1), (1,0), (1,1).
inline Mat vertices(const Box& box) {
  const int m = box.dim();
  if (m > 20) throw std::invalid_argument("vertices: input dimension too large");
  for (int d = 0; d < m; ++d) {
    if (!std::isfinite(box.lo(d)) || !std::isfinite(box.hi(d))) {
      throw std::invalid_argument("vertices: unbounded interval");
    }
  }
  const Eigen::Index count = Eigen::Index{1} << m;
  Mat out(m, count);
  for (Eigen::Index j = 0; j < count; ++j) {
    for (int d = 0; d < m; ++d) {
      const bool high = ((j >> (m - 1 - d)) & 1) != 0;
      out(d, j) = high ? box.hi(d) : box.lo(d);
    }
  }
  return out;
}

/// Value and gradient of a scalar state function.
struct MarginEval {
  double value = 0.0;
  Vec gradient;
};

/// Dynamics xdot = drift(x) + actuation(x) u together with the scenario's
/// state box, input box and safe-margin function h (safe set {h >= 0}).
struct ControlAffineSystem {
  std::string id;
  Box state_box;
  Box input_box;
  std::function<Vec(const Vec&)> drift;
  std::function<Mat(const Vec&)> actuation;
  std::function<MarginEval(const Vec&)> safe_margin;

  int state_dim() const { return state_box.dim(); }
  int input_dim() const { return input_box.dim(); }
};

inline Vec dynamics_eval(const ControlAffineSystem& sys,
                         const Eigen::Ref<const Vec>& x,
                         const Eigen::Ref<const Vec>& u) {
  require_dim(x.size(), sys.state_dim(), "dynamics_eval state");
  require_dim(u.size(), sys.input_dim(), "dynamics_eval input");
  const Vec xv = x;
  return sys.drift(xv) + sys.actuation(xv) * u;
}

/// Classical RK4 step with u held over [t, t + dt].
inline Vec rk4_step(const ControlAffineSystem& sys, const Eigen::Ref<const Vec>& x,
                    const Eigen::Ref<const Vec>& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const Vec k1 = dynamics_eval(sys, x, u);
  const Vec k2 = dynamics_eval(sys, x + 0.5 * dt * k1, u);
  const Vec k3 = dynamics_eval(sys, x + 0.5 * dt * k2, u);
  const Vec k4 = dynamics_eval(sys, x + dt * k3, u);
  Vec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw NumericalError("rk4_step produced a non-finite state");
  return next;
}

// ---------------------------------------------------------------------------
// Inverted pendulum: theta' = omega, omega' = sin(theta) + u.

struct PendulumParams {
  double safe_angle = std::numbers::pi / 3.0;
  double u_max = 1.0;
  double angle_limit = std::numbers::pi / 2.0;
  double rate_limit = 2.0;
};

/// Smooth surrogate of |theta| <= a: h = a^2 - theta^2.
inline MarginEval pendulum_h(const Eigen::Ref<const Vec>& x,
                             double safe_angle = std::numbers::pi / 3.0) {
  require_dim(x.size(), 2, "pendulum_h");
  MarginEval out;
  out.value = safe_angle * safe_angle - x(0) * x(0);
  out.gradient = Vec::Zero(2);
  out.gradient(0) = -2.0 * x(0);
  return out;
}

inline ControlAffineSystem make_pendulum(const PendulumParams& p = {}) {
  ControlAffineSystem sys;
  sys.id = "pendulum";
  sys.state_box = Box(Eigen::Vector2d(-p.angle_limit, -p.rate_limit),
                      Eigen::Vector2d(p.angle_limit, p.rate_limit));
  sys.input_box = Box(Vec::Constant(1, -p.u_max), Vec::Constant(1, p.u_max));
  sys.drift = [](const Vec& x) {
    require_dim(x.size(), 2, "pendulum drift");
    return Vec(Eigen::Vector2d(x(1), std::sin(x(0))));
  };
  sys.actuation = [](const Vec& x) {
    require_dim(x.size(), 2, "pendulum actuation");
    return Mat(Eigen::Vector2d(0.0, 1.0));
  };
  const double a = p.safe_angle;
  sys.safe_margin = [a](const Vec& x) { return pendulum_h(x, a); };
  return sys;
}

// ---------------------------------------------------------------------------
// Quadrotor with Euler-angle attitude.
//
// State: (x, y, z, vx, vy, vz, roll, pitch, yaw, wx, wy, wz); input: total
// thrust F and body moments (tx, ty, tz). R = Rz(yaw) Ry(pitch) Rx(roll).

namespace quad {
enum Index : int { X, Y, Z, VX, VY, VZ, ROLL, PITCH, YAW, WX, WY, WZ };
}  // namespace quad

struct QuadrotorParams {
  double mass = 0.5;
  Eigen::Vector3d inertia{2.3e-3, 2.3e-3, 4.0e-3};
  double gravity = 9.81;
  double max_torque = 0.1;
  /// Sharpness of the log-sum-exp obstacle margin.
  double rho = 10.0;
  /// Obstacle footprint [x_lo, x_hi] x [y_lo, y_hi].
  double obstacle_x_lo = -1.5;
  double obstacle_x_hi = -0.75;
  double obstacle_y_lo = -0.375;
  double obstacle_y_hi = 0.375;
  Box state_box = default_state_box();

  static Box default_state_box() {
    constexpr double pi = std::numbers::pi;
    Vec hi(12);
    hi << 3, 3, 2, 2, 2, 2, pi / 4, pi / 4, pi, 2, 2, 2;
    return Box::symmetric(hi);
  }
};

/// Smooth conservative obstacle margin:
///   h = (1/rho) log sum_i exp(rho m_i) - (log 4)/rho <= max_i m_i
/// with m = (x_lo - x, x - x_hi, y_lo - y, y - y_hi).
inline MarginEval quadrotor_h(const Eigen::Ref<const Vec>& x,
                              const QuadrotorParams& p = {}) {
  require_dim(x.size(), 12, "quadrotor_h");
  const double px = x(quad::X), py = x(quad::Y);
  const Eigen::Vector4d margins(p.obstacle_x_lo - px, px - p.obstacle_x_hi,
                                p.obstacle_y_lo - py, py - p.obstacle_y_hi);
  const double top = margins.maxCoeff();
  const Eigen::Vector4d w = (p.rho * (margins.array() - top)).exp();
  const double total = w.sum();
  MarginEval out;
  out.value = top + std::log(total) / p.rho - std::log(4.0) / p.rho;
  const Eigen::Vector4d soft = w / total;
  out.gradient = Vec::Zero(12);
  out.gradient(quad::X) = -soft(0) + soft(1);
  out.gradient(quad::Y) = -soft(2) + soft(3);
  return out;
}

/// R(roll, pitch, yaw) e3, the body thrust axis in the world frame.
inline Eigen::Vector3d thrust_axis(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  return {cr * sp * cy + sr * sy, cr * sp * sy - sr * cy, cr * cp};
}

inline ControlAffineSystem make_quadrotor(const QuadrotorParams& p = {}) {
  require_dim(p.state_box.dim(), 12, "quadrotor state box");
  if (!(p.mass > 0.0) || !(p.inertia.array() > 0.0).all()) {
    throw std::invalid_argument("quadrotor mass and inertia must be positive");
  }
  ControlAffineSystem sys;
  sys.id = "quadrotor";
  sys.state_box = p.state_box;
  Vec ulo(4), uhi(4);
  ulo << 0.0, -p.max_torque, -p.max_torque, -p.max_torque;
  uhi << 2.0 * p.mass * p.gravity, p.max_torque, p.max_torque, p.max_torque;
  sys.input_box = Box(ulo, uhi);

  sys.drift = [p](const Vec& s) {
    require_dim(s.size(), 12, "quadrotor drift");
    using namespace quad;
    Vec f = Vec::Zero(12);
    f.segment<3>(X) = s.segment<3>(VX);
    f(VZ) = -p.gravity;
    const double roll = s(ROLL), pitch = s(PITCH);
    const double sr = std::sin(roll), cr = std::cos(roll);
    const double tp = std::tan(pitch), cp = std::cos(pitch);
    const double wx = s(WX), wy = s(WY), wz = s(WZ);
    f(ROLL) = wx + sr * tp * wy + cr * tp * wz;
    f(PITCH) = cr * wy - sr * wz;
    f(YAW) = (sr * wy + cr * wz) / cp;
    const Eigen::Vector3d w(wx, wy, wz);
    const Eigen::Vector3d jw = p.inertia.cwiseProduct(w);
    f.segment<3>(WX) = -w.cross(jw).cwiseQuotient(p.inertia);
    return f;
  };
  sys.actuation = [p](const Vec& s) {
    require_dim(s.size(), 12, "quadrotor actuation");
    using namespace quad;
    Mat g = Mat::Zero(12, 4);
    g.block<3, 1>(VX, 0) = thrust_axis(s(ROLL), s(PITCH), s(YAW)) / p.mass;
    g(WX, 1) = 1.0 / p.inertia(0);
    g(WY, 2) = 1.0 / p.inertia(1);
    g(WZ, 3) = 1.0 / p.inertia(2);
    return g;
  };
  sys.safe_margin = [p](const Vec& s) { return quadrotor_h(s, p); };
  return sys;
}

}  // namespace pcbf
