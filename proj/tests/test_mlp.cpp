#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pcbf/gradcheck.hpp"
#include "pcbf/mlp.hpp"

using namespace pcbf;

namespace {

Vec random_vec(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

// Perturbs every parameter so that biases are nonzero too.
MlpParams random_params(const std::vector<int>& sizes, std::uint64_t seed) {
  MlpParams p = mlp_init(sizes, seed);
  std::mt19937_64 rng(seed + 101);
  p.flat() += random_vec(static_cast<int>(p.size()), rng, 0.2);
  return p;
}

}  // namespace

TEST(MlpParams, PaperArchitectureCount) {
  EXPECT_EQ(parameter_count({2, 256, 256, 256, 1}), 132609);
  EXPECT_EQ(mlp_init({2, 256, 256, 256, 1}, 3).size(), 132609);
}

TEST(MlpParams, RejectsBadSizes) {
  EXPECT_THROW(mlp_init({2, 4, 2}, 0), std::invalid_argument);
  EXPECT_THROW(mlp_init({2, 0, 1}, 0), std::invalid_argument);
  EXPECT_THROW(mlp_init({1}, 0), std::invalid_argument);
}

TEST(MlpParams, InitIsDeterministic) {
  const MlpParams a = mlp_init({3, 16, 16, 1}, 42);
  const MlpParams b = mlp_init({3, 16, 16, 1}, 42);
  const MlpParams c = mlp_init({3, 16, 16, 1}, 43);
  EXPECT_EQ(a.flat(), b.flat());
  EXPECT_NE(a.flat(), c.flat());
}

TEST(MlpParams, InitScaleAndZeroBias) {
  const MlpParams p = mlp_init({200, 300, 1}, 1);
  EXPECT_TRUE(p.bias(0).isZero());
  EXPECT_TRUE(p.bias(1).isZero());
  const auto w = p.weight(0);
  const double var = w.array().square().mean();
  EXPECT_NEAR(var, 1.0 / 200.0, 0.1 / 200.0);
}

TEST(MlpParams, FlattenRoundTrip) {
  const MlpParams p = random_params({4, 7, 5, 1}, 9);
  const MlpParams q = MlpParams::from_flat(p.layer_sizes(), p.flat());
  EXPECT_EQ(p.flat(), q.flat());
  for (int k = 0; k < p.num_layers(); ++k) {
    EXPECT_EQ(Mat(p.weight(k)), Mat(q.weight(k)));
    EXPECT_EQ(Vec(p.bias(k)), Vec(q.bias(k)));
  }
  EXPECT_THROW(MlpParams::from_flat({4, 7, 1}, Vec::Zero(3)), std::invalid_argument);
}

TEST(MlpForward, ZeroAndConstantNetworks) {
  MlpParams p({3, 5, 1});
  const Vec x = Vec::LinSpaced(3, -1.0, 2.0);
  EXPECT_EQ(mlp_forward(p, x), 0.0);
  EXPECT_TRUE(mlp_input_gradient(p, x).isZero());
  p.bias(1)(0) = 1.75;
  EXPECT_EQ(mlp_forward(p, x), 1.75);
  EXPECT_EQ(mlp_forward(p, Vec::Zero(3)), 1.75);
}

TEST(MlpForward, SingleHiddenUnitByHand) {
  MlpParams p({2, 1, 1});
  p.weight(0) << 0.5, -1.5;
  p.bias(0)(0) = 0.3;
  p.weight(1)(0, 0) = 2.0;
  p.bias(1)(0) = -0.1;
  EXPECT_DOUBLE_EQ(mlp_forward(p, Vec::Zero(2)), 2.0 * std::tanh(0.3) - 0.1);
  const Vec x = Eigen::Vector2d(0.4, 0.2);
  EXPECT_DOUBLE_EQ(mlp_forward(p, x), 2.0 * std::tanh(0.5 * 0.4 - 1.5 * 0.2 + 0.3) - 0.1);
}

TEST(MlpForward, LinearLayerGradientIsWeights) {
  MlpParams p({3, 1});
  p.weight(0) << 1.0, -2.0, 0.5;
  p.bias(0)(0) = 4.0;
  const Vec x = Eigen::Vector3d(0.3, 0.1, -2.0);
  EXPECT_DOUBLE_EQ(mlp_forward(p, x), 0.3 - 0.2 - 1.0 + 4.0);
  EXPECT_EQ(mlp_input_gradient(p, x), Vec(Eigen::Vector3d(1.0, -2.0, 0.5)));
}

TEST(MlpForward, DimensionMismatchThrows) {
  const MlpParams p = mlp_init({3, 4, 1}, 0);
  EXPECT_THROW(mlp_forward(p, Vec::Zero(2)), std::invalid_argument);
  EXPECT_THROW(mlp_input_gradient(p, Vec::Zero(4)), std::invalid_argument);
}

TEST(MlpForward, BatchMatchesSingle) {
  const MlpParams p = random_params({3, 8, 8, 1}, 5);
  std::mt19937_64 rng(1);
  Mat xs(3, 6);
  for (int c = 0; c < 6; ++c) xs.col(c) = random_vec(3, rng);
  MlpTape tape(p, xs);
  for (int c = 0; c < 6; ++c) {
    EXPECT_EQ(tape.values()(c), mlp_forward(p, xs.col(c)));
    EXPECT_TRUE(tape.input_gradients().col(c).isApprox(mlp_input_gradient(p, xs.col(c)), 1e-14));
  }
}

TEST(MlpForward, EvaluationIsPure) {
  const MlpParams p = random_params({4, 12, 12, 1}, 8);
  const Vec x = Vec::LinSpaced(4, -0.5, 0.7);
  const DualEval a = mlp_eval(p, x);
  const DualEval b = mlp_eval(p, x);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.input_grad, b.input_grad);
}

TEST(MlpInputGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 6;
    const MlpParams p = random_params({n, 10, 7, 1}, 1000 + trial);
    const Vec x = random_vec(n, rng);
    const Vec g = mlp_input_gradient(p, x);
    const double scale = g.cwiseAbs().maxCoeff();
    for (int i = 0; i < n; ++i) {
      Vec xp = x, xm = x;
      xp(i) += 1e-5;
      xm(i) -= 1e-5;
      const double fd = (mlp_forward(p, xp) - mlp_forward(p, xm)) / 2e-5;
      EXPECT_LT(relative_error(fd, g(i), scale), 1e-6) << "trial " << trial << " coord " << i;
    }
  }
}

// Functional mixing values and input gradients, as the feasibility loss does:
//   F = sum_i a_i y_i + b_i y_i^2 + c_i . grad y_i + (d_i . grad y_i)^2
TEST(ParamGradient, MixedFunctionalMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 4;
    const MlpParams p = random_params({n, 9, 6, 1}, 50 + trial);
    const int m = 5;
    Mat probes(n, m), cdir(n, m), ddir(n, m);
    for (int c = 0; c < m; ++c) {
      probes.col(c) = random_vec(n, rng);
      cdir.col(c) = random_vec(n, rng);
      ddir.col(c) = random_vec(n, rng);
    }
    const Vec a = random_vec(m, rng), b = random_vec(m, rng);
    auto functional = [&](const RowVec& y, const Mat& g, RowVec* dy, Mat* dg) {
      double total = 0.0;
      for (int c = 0; c < m; ++c) {
        const double s = ddir.col(c).dot(g.col(c));
        total += a(c) * y(c) + b(c) * y(c) * y(c) + cdir.col(c).dot(g.col(c)) + s * s;
        if (dy) {
          (*dy)(c) += a(c) + 2.0 * b(c) * y(c);
          dg->col(c) += cdir.col(c) + 2.0 * s * ddir.col(c);
        }
      }
      return total;
    };
    EXPECT_LT(finite_diff_check(functional, p, probes), 1e-5) << "trial " << trial;
  }
}

TEST(ParamGradient, LinearFunctionalIsExact) {
  const MlpParams p = random_params({3, 1}, 4);
  Mat probes(3, 4);
  probes.setRandom();
  auto functional = [](const RowVec& y, const Mat&, RowVec* dy, Mat*) {
    if (dy) dy->setOnes();
    return y.sum();
  };
  EXPECT_LT(finite_diff_check(functional, p, probes), 1e-9);
}

TEST(ParamGradient, ZeroFunctional) {
  const MlpParams p = random_params({2, 5, 1}, 4);
  const Mat probes = Mat::Random(2, 3);
  auto zero = [](const RowVec&, const Mat&, RowVec*, Mat*) { return 0.0; };
  const auto [value, grad] = param_gradient(p, probes, zero);
  EXPECT_EQ(value, 0.0);
  EXPECT_TRUE(grad.isZero());
  EXPECT_EQ(finite_diff_check(zero, p, probes), 0.0);
}

TEST(ParamGradient, LargeNetworkSubsetCheck) {
  const MlpParams p = random_params({2, 64, 64, 1}, 12);
  ASSERT_GT(p.size(), GradCheckOptions{}.full_check_limit);
  const Mat probes = Mat::Random(2, 8);
  auto functional = [](const RowVec& y, const Mat& g, RowVec* dy, Mat* dg) {
    double total = 0.0;
    for (Eigen::Index c = 0; c < y.size(); ++c) {
      total += y(c) * g(0, c);
      if (dy) {
        (*dy)(c) += g(0, c);
        (*dg)(0, c) += y(c);
      }
    }
    return total;
  };
  EXPECT_LT(finite_diff_check(functional, p, probes), 1e-5);
}
