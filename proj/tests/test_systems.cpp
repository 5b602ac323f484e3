#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "pcbf/systems.hpp"

using namespace pcbf;
using std::numbers::pi;

namespace {

Vec uniform_in(const Box& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec x(box.dim());
  for (int i = 0; i < box.dim(); ++i) x(i) = box.lo(i) + unit(rng) * (box.hi(i) - box.lo(i));
  return x;
}

ControlAffineSystem single_integrator() {
  ControlAffineSystem sys;
  sys.id = "integrator";
  sys.state_box = Box::symmetric(Vec::Ones(1));
  sys.input_box = Box::symmetric(Vec::Ones(1));
  sys.drift = [](const Vec&) { return Vec(Vec::Zero(1)); };
  sys.actuation = [](const Vec&) { return Mat(Mat::Ones(1, 1)); };
  sys.safe_margin = [](const Vec& x) { return MarginEval{1.0 - x(0) * x(0), -2.0 * x}; };
  return sys;
}

}  // namespace

TEST(Box, RejectsUnboundedAndEmpty) {
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_THROW(Box(Vec::Constant(1, -inf), Vec::Constant(1, 1.0)), std::invalid_argument);
  EXPECT_THROW(Box(Vec::Constant(1, 1.0), Vec::Constant(1, 0.0)), std::invalid_argument);
  EXPECT_THROW(vertices(Box(Vec::Constant(1, 0.0), Vec::Constant(1, inf))), std::invalid_argument);
}

TEST(Vertices, OneDimensional) {
  const Mat v = vertices(Box::symmetric(Vec::Ones(1)));
  ASSERT_EQ(v.cols(), 2);
  EXPECT_EQ(v(0, 0), -1.0);
  EXPECT_EQ(v(0, 1), 1.0);
}

TEST(Vertices, UnitSquareOrder) {
  const Mat v = vertices(Box(Vec::Zero(2), Vec::Ones(2)));
  Mat expected(2, 4);
  expected << 0, 0, 1, 1,
              0, 1, 0, 1;
  EXPECT_EQ(v, expected);
}

TEST(Vertices, FourDimensionalEndpoints) {
  Vec lo(4), hi(4);
  lo << 0.0, -0.1, -0.2, -0.3;
  hi << 9.81, 0.1, 0.2, 0.3;
  const Box box(lo, hi);
  const Mat v = vertices(box);
  ASSERT_EQ(v.cols(), 16);
  for (int c = 0; c < 16; ++c) {
    EXPECT_TRUE(box.contains(v.col(c)));
    for (int i = 0; i < 4; ++i) EXPECT_TRUE(v(i, c) == lo(i) || v(i, c) == hi(i));
    for (int d = 0; d < c; ++d) EXPECT_NE(v.col(c), v.col(d));
  }
}

TEST(Pendulum, MarginExamples) {
  const MarginEval centre = pendulum_h(Vec::Zero(2));
  EXPECT_NEAR(centre.value, 1.0966, 1e-4);
  EXPECT_DOUBLE_EQ(centre.value, (pi / 3) * (pi / 3));
  EXPECT_TRUE(centre.gradient.isZero());
  EXPECT_NEAR(pendulum_h(Eigen::Vector2d(pi / 3, 0.7)).value, 0.0, 1e-15);
  EXPECT_LT(pendulum_h(Eigen::Vector2d(pi / 2, 0.0)).value, 0.0);
  EXPECT_EQ(pendulum_h(Eigen::Vector2d(0.3, 5.0)).gradient, Vec(Eigen::Vector2d(-0.6, 0.0)));
}

TEST(Pendulum, DynamicsExamples) {
  const auto sys = make_pendulum();
  EXPECT_TRUE(dynamics_eval(sys, Vec::Zero(2), Vec::Zero(1)).isZero());
  const Vec d = dynamics_eval(sys, Eigen::Vector2d(pi / 6, 1.0), Vec::Constant(1, -1.0));
  EXPECT_DOUBLE_EQ(d(0), 1.0);
  EXPECT_NEAR(d(1), -0.5, 1e-15);
  EXPECT_THROW(dynamics_eval(sys, Vec::Zero(3), Vec::Zero(1)), std::invalid_argument);
  EXPECT_THROW(dynamics_eval(sys, Vec::Zero(2), Vec::Zero(2)), std::invalid_argument);
}

TEST(Pendulum, OddSymmetry) {
  const auto sys = make_pendulum();
  std::mt19937_64 rng(4);
  for (int k = 0; k < 200; ++k) {
    const Vec x = uniform_in(sys.state_box, rng);
    const Vec u = uniform_in(sys.input_box, rng);
    EXPECT_TRUE(dynamics_eval(sys, -x, -u).isApprox(-dynamics_eval(sys, x, u), 1e-14));
  }
}

TEST(Quadrotor, MarginAtOrigin) {
  const MarginEval h = quadrotor_h(Vec::Zero(12));
  const double expected =
      std::log(std::exp(-15.0) + std::exp(7.5) + 2.0 * std::exp(-3.75)) / 10.0 - std::log(4.0) / 10.0;
  EXPECT_NEAR(h.value, expected, 1e-12);
  EXPECT_NEAR(h.value, 0.611, 1e-3);
}

TEST(Quadrotor, InsideObstacleIsUnsafe) {
  Vec x = Vec::Zero(12);
  x(quad::X) = -1.125;
  EXPECT_LT(quadrotor_h(x).value, 0.0);
}

TEST(Quadrotor, SharpLimitIsMaxMargin) {
  QuadrotorParams p;
  p.rho = 1e4;
  Vec x = Vec::Zero(12);
  x(quad::X) = 0.4;
  x(quad::Y) = 0.1;
  EXPECT_NEAR(quadrotor_h(x, p).value, 0.4 + 0.75, 1e-3);
}

TEST(Quadrotor, MarginBelowMaxAndGradientMatchesFd) {
  const QuadrotorParams p;
  std::mt19937_64 rng(9);
  for (int k = 0; k < 10000; ++k) {
    const Vec x = uniform_in(p.state_box, rng);
    const double px = x(quad::X), py = x(quad::Y);
    const double top = std::max({-1.5 - px, px + 0.75, -0.375 - py, py - 0.375});
    const MarginEval h = quadrotor_h(x, p);
    EXPECT_LE(h.value, top + 1e-15);
    if (h.value >= 0.0) { EXPECT_GE(top, 0.0); }
    if (k % 100 == 0) {
      for (int i : {int(quad::X), int(quad::Y)}) {
        Vec xp = x, xm = x;
        xp(i) += 1e-6;
        xm(i) -= 1e-6;
        EXPECT_NEAR((quadrotor_h(xp, p).value - quadrotor_h(xm, p).value) / 2e-6, h.gradient(i), 1e-6);
      }
    }
  }
}

TEST(Quadrotor, HoverIsEquilibrium) {
  const QuadrotorParams p;
  const auto sys = make_quadrotor(p);
  Vec u(4);
  u << p.mass * p.gravity, 0.0, 0.0, 0.0;
  Vec x = Vec::Zero(12);
  x(quad::X) = 1.0;
  x(quad::YAW) = 0.7;
  EXPECT_LT(dynamics_eval(sys, x, u).norm(), 1e-14);
}

TEST(Quadrotor, AffineInInput) {
  const auto sys = make_quadrotor();
  std::mt19937_64 rng(2);
  for (int k = 0; k < 50; ++k) {
    const Vec x = uniform_in(sys.state_box, rng);
    const Vec u1 = uniform_in(sys.input_box, rng), u2 = uniform_in(sys.input_box, rng);
    const Vec mid = dynamics_eval(sys, x, 0.5 * (u1 + u2));
    EXPECT_TRUE(mid.isApprox(0.5 * (dynamics_eval(sys, x, u1) + dynamics_eval(sys, x, u2)), 1e-12));
  }
}

TEST(Quadrotor, TiltedThrustAndGyroscopicTerms) {
  const QuadrotorParams p;
  const auto sys = make_quadrotor(p);
  Vec x = Vec::Zero(12);
  x(quad::PITCH) = 0.3;  // nose down about body y tilts thrust toward +x
  Vec u(4);
  u << 1.0, 0.0, 0.0, 0.0;
  const Vec d = dynamics_eval(sys, x, u);
  EXPECT_NEAR(d(quad::VX), std::sin(0.3) / p.mass, 1e-14);
  EXPECT_NEAR(d(quad::VZ), std::cos(0.3) / p.mass - p.gravity, 1e-14);

  Vec y = Vec::Zero(12);
  y(quad::WX) = 1.0;
  y(quad::WZ) = 2.0;
  const Vec e = dynamics_eval(sys, y, Vec::Zero(4));
  // J wdot = -w x Jw: only the y-component is nonzero here.
  const double jx = p.inertia(0), jz = p.inertia(2);
  EXPECT_NEAR(e(quad::WY), -(2.0 * jx * 1.0 - 1.0 * jz * 2.0) / p.inertia(1), 1e-12);
  EXPECT_NEAR(e(quad::ROLL), 1.0, 1e-15);
  EXPECT_NEAR(e(quad::YAW), 2.0, 1e-15);
}

TEST(Rk4, ExactOnConstantInputIntegrator) {
  const auto sys = single_integrator();
  const Vec next = rk4_step(sys, Vec::Constant(1, 0.2), Vec::Constant(1, 0.5), 0.1);
  EXPECT_NEAR(next(0), 0.25, 1e-15);
}

TEST(Rk4, FourthOrderOnPendulum) {
  const auto sys = make_pendulum();
  const Vec x0 = Eigen::Vector2d(0.4, -0.3);
  const Vec u = Vec::Constant(1, 0.2);
  auto integrate = [&](double dt, int steps) {
    Vec x = x0;
    for (int k = 0; k < steps; ++k) x = rk4_step(sys, x, u, dt);
    return x;
  };
  const Vec ref = integrate(1e-4, 10000);
  const double e1 = (integrate(0.1, 10) - ref).norm();
  const double e2 = (integrate(0.05, 20) - ref).norm();
  EXPECT_GE(std::log2(e1 / e2), 3.9);
}

TEST(Rk4, RejectsBadStepAndNonFinite) {
  const auto sys = make_pendulum();
  EXPECT_THROW(rk4_step(sys, Vec::Zero(2), Vec::Zero(1), 0.0), std::invalid_argument);
  Vec bad(2);
  bad << std::numeric_limits<double>::quiet_NaN(), 0.0;
  EXPECT_THROW(rk4_step(sys, bad, Vec::Zero(1), 0.01), NumericalError);
}

TEST(Rk4, SimulationRateStep) {
  const auto sys = make_quadrotor();
  Vec u(4);
  u << 0.5 * 9.81, 0.0, 0.0, 0.0;
  const Vec x = rk4_step(sys, Vec::Zero(12), u, 1.0 / 300.0);
  EXPECT_NEAR(x.norm(), 0.0, 1e-15);
}
