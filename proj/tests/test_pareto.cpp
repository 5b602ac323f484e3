#include <gtest/gtest.h>

#include <random>

#include "pcbf/pareto.hpp"

using namespace pcbf;

namespace {

Vec random_vec(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

// min over a uniform lambda grid of |lambda g1 + (1 - lambda) g2|^2.
double grid_min_norm2(const Vec& g1, const Vec& g2, int points) {
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < points; ++k) {
    const double l = static_cast<double>(k) / (points - 1);
    best = std::min(best, (l * g1 + (1.0 - l) * g2).squaredNorm());
  }
  return best;
}

}  // namespace

TEST(BaseSubproblem, OrthogonalUnitVectors) {
  const auto r = solve_base_subproblem(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1));
  EXPECT_DOUBLE_EQ(r.lambda, 0.5);
  EXPECT_TRUE(r.d.isApprox(Vec(Eigen::Vector2d(-0.5, -0.5))));
}

TEST(BaseSubproblem, ZeroGradients) {
  const auto r = solve_base_subproblem(Vec::Zero(3), Vec::Zero(3));
  EXPECT_TRUE(r.d.isZero());
  EXPECT_EQ(r.lambda, 0.0);
}

TEST(BaseSubproblem, ClampsNegativeLambda) {
  const auto r = solve_base_subproblem(Eigen::Vector2d(2, 0), Eigen::Vector2d(1, 0));
  EXPECT_EQ(r.lambda, 0.0);
  EXPECT_EQ(r.d, Vec(Eigen::Vector2d(-1, 0)));
  EXPECT_NEAR(r.d.squaredNorm(), grid_min_norm2(Eigen::Vector2d(2, 0), Eigen::Vector2d(1, 0), 10001), 1e-12);
}

TEST(BaseSubproblem, DegenerateEqualGradients) {
  const Vec g = Eigen::Vector3d(0.3, -1.0, 2.0);
  const auto r = solve_base_subproblem(g, g + Vec::Constant(3, 1e-14));
  EXPECT_EQ(r.lambda, 0.0);
  EXPECT_TRUE(r.d.isApprox(-g, 1e-12));
}

TEST(BaseSubproblem, MinNormAgainstLambdaGrid) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const int n = 1 + trial % 7;
    const Vec g1 = random_vec(n, rng), g2 = random_vec(n, rng);
    const auto r = solve_base_subproblem(g1, g2);
    EXPECT_GE(r.lambda, 0.0);
    EXPECT_LE(r.lambda, 1.0);
    EXPECT_LE(r.d.squaredNorm(), grid_min_norm2(g1, g2, 10001) + 1e-10);
  }
}

TEST(BaseSubproblem, LemmaOneInequality) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 5000; ++trial) {
    const int n = 1 + trial % 9;
    const Vec g1 = random_vec(n, rng), g2 = random_vec(n, rng);
    const Vec d = solve_base_subproblem(g1, g2).d;
    if (d.isZero()) continue;
    const double alpha = std::max(g1.dot(d), g2.dot(d));
    EXPECT_LE(alpha, -0.5 * d.squaredNorm() + 1e-12);
    EXPECT_LT(alpha, 0.0);
  }
}

TEST(BaseSubproblem, MiddleRegionSwapSymmetry) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec g1 = random_vec(4, rng), g2 = random_vec(4, rng);
    const auto a = solve_base_subproblem(g1, g2);
    const auto b = solve_base_subproblem(g2, g1);
    EXPECT_TRUE((a.d - b.d).norm() < 1e-12);
    EXPECT_NEAR(a.lambda, 1.0 - b.lambda, 1e-12);
  }
}

TEST(Regions, Classification) {
  // Binary-exact values so the boundary cases are decided without rounding.
  const RegionBounds b{2.0, 0.125, 0.25};
  EXPECT_EQ(classify_region(0.0, 0.5, b), Region::Above);
  EXPECT_EQ(classify_region(0.0, 0.1875, b), Region::Between);
  EXPECT_EQ(classify_region(0.0, 0.0625, b), Region::Below);
  EXPECT_EQ(classify_region(0.125, 0.5, b), Region::Between);    // on the upper line
  EXPECT_EQ(classify_region(0.125, 0.375, b), Region::Between);  // on the lower line
  EXPECT_EQ(classify_region(0.125, 0.5 + 1e-12, b), Region::Above);
  EXPECT_EQ(classify_region(0.125, 0.375 - 1e-12, b), Region::Below);
  EXPECT_EQ(region_name(Region::Above), "above");
}

TEST(Regions, TaskGradientsFollowEquations) {
  const Vec f = Eigen::Vector2d(1.0, 2.0), v = Eigen::Vector2d(-3.0, 0.5);
  const double beta = 2.0;
  auto [a1, a2] = region_task_gradients(Region::Above, f, v, beta);
  EXPECT_EQ(a1, v - beta * f);
  EXPECT_EQ(a2, f);
  auto [m1, m2] = region_task_gradients(Region::Between, f, v, beta);
  EXPECT_EQ(m1, f);
  EXPECT_EQ(m2, v);
  auto [b1, b2] = region_task_gradients(Region::Below, f, v, beta);
  EXPECT_EQ(b1, beta * f - v);
  EXPECT_EQ(b2, f);
}

TEST(Regions, MiddleWithFlatFeasibility) {
  const Vec v = Eigen::Vector3d(0.2, -0.4, 1.0);
  const RegionDirection r = pcbf_direction(0.0, 0.2, Vec::Zero(3), v, {1.0, 0.1, 0.3});
  EXPECT_EQ(r.region, Region::Between);
  // g1 = 0 is the min-norm point: d = 0, i.e. no common descent exists.
  EXPECT_TRUE(r.direction.d.isZero());
}
