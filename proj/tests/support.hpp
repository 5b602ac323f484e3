#pragma once

// Shared fixtures for the test and acceptance binaries.

#include <cmath>
#include <memory>
#include <random>

#include "pcbf/barrier.hpp"
#include "pcbf/pareto.hpp"

namespace pcbf::testing {

inline Vec uniform_in(const Box& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec x(box.dim());
  for (int i = 0; i < box.dim(); ++i) x(i) = box.lo(i) + unit(rng) * (box.hi(i) - box.lo(i));
  return x;
}

/// Smooth n-state, m-input control-affine system with random coefficients:
///   f(x) = A x + 0.3 sin(x),  g(x) = B + 0.2 diag(cos x) C,
///   h(x) = 1 - |x|^2 / 2 on the box [-1.5, 1.5]^n.
inline std::shared_ptr<const ControlAffineSystem> random_system(int n, int m,
                                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Mat a(n, n), b(n, m), c(n, m);
  for (auto* mat : {&a, &b, &c}) {
    for (Eigen::Index j = 0; j < mat->cols(); ++j)
      for (Eigen::Index i = 0; i < mat->rows(); ++i) (*mat)(i, j) = normal(rng);
  }
  a /= std::sqrt(static_cast<double>(n));
  auto sys = std::make_shared<ControlAffineSystem>();
  sys->id = "random";
  sys->state_box = Box::symmetric(Vec::Constant(n, 1.5));
  sys->input_box = Box::symmetric(Vec::Ones(m));
  sys->drift = [a](const Vec& x) { return Vec(a * x + 0.3 * x.array().sin().matrix()); };
  sys->actuation = [b, c](const Vec& x) {
    return Mat(b + 0.2 * x.array().cos().matrix().asDiagonal() * c);
  };
  sys->safe_margin = [](const Vec& x) { return MarginEval{1.0 - 0.5 * x.squaredNorm(), -x}; };
  return sys;
}

/// Random network whose biases are nonzero as well.
inline MlpParams random_network(const std::vector<int>& sizes, std::uint64_t seed,
                                double scale = 1.0) {
  MlpParams p = mlp_init(sizes, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> normal(0.0, 0.3);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.flat()(i) = scale * (p.flat()(i) + normal(rng));
  return p;
}

/// Appendix closed forms for the descent direction in each region, written
/// directly in terms of the two loss gradients.
inline Vec closed_form_direction(Region region, const Vec& gf, const Vec& gv, double beta) {
  auto clamp01 = [](double x) { return std::max(0.0, std::min(x, 1.0)); };
  switch (region) {
    case Region::Above: {
      const Vec w = (1.0 + beta) * gf - gv;
      const double l = clamp01(w.dot(gf) / w.squaredNorm());
      return (l + l * beta - 1.0) * gf - l * gv;
    }
    case Region::Between: {
      const double l = clamp01((gf - gv).dot(gf) / (gv - gf).squaredNorm());
      return -l * gv - (1.0 - l) * gf;
    }
    case Region::Below: {
      const Vec w = gv + (1.0 - beta) * gf;
      const double l = clamp01(w.dot(gf) / w.squaredNorm());
      return (l - l * beta - 1.0) * gf + l * gv;
    }
  }
  return {};
}

/// Exact minimiser of max(g1.d, g2.d) + |d|^2 / 2 by enumerating the active
/// sets of the equivalent QP in (d, t).
inline Vec brute_force_qp(const Vec& g1, const Vec& g2) {
  auto objective = [&](const Vec& d) { return std::max(g1.dot(d), g2.dot(d)) + 0.5 * d.squaredNorm(); };
  std::vector<Vec> candidates{-g1, -g2};
  const Vec diff = g1 - g2;
  if (diff.squaredNorm() > 0.0) {
    // Both constraints active: g1.d = g2.d with d = -(l g1 + (1 - l) g2).
    const double l = -g2.dot(diff) / diff.squaredNorm();
    if (l >= 0.0 && l <= 1.0) candidates.push_back(-(l * g1 + (1.0 - l) * g2));
  }
  Vec best = candidates.front();
  for (const Vec& c : candidates)
    if (objective(c) < objective(best)) best = c;
  return best;
}

}  // namespace pcbf::testing
