#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "pcbf/mlp.hpp"

namespace pcbf {

struct GradCheckOptions {
  double step = 1e-5;
  /// Above this parameter count only a random subset of coordinates is probed.
  Eigen::Index full_check_limit = 2000;
  Eigen::Index subset_size = 256;
  std::uint64_t seed = 7;
};

/// Relative error used by the gradient checks:
///   |a - b| / max(|a|, |b|, 1e-6 * max(1, scale))
/// where `scale` is the largest analytic gradient magnitude. The floor keeps
/// near-zero components from dominating through rounding noise alone.
inline double relative_error(double a, double b, double scale) {
  const double floor = 1e-6 * std::max(1.0, scale);
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central-difference check of an analytic theta-gradient. `value_fn(theta)`
/// evaluates the scalar, `analytic` is the gradient under test. Returns the
/// maximum relative error over the probed coordinates.
template <typename ValueFn>
double finite_diff_check(ValueFn&& value_fn, const Vec& theta,
                         const Vec& analytic, GradCheckOptions opts = {}) {
  if (!(opts.step > 0.0)) throw std::invalid_argument("step must be positive");
  require_dim(analytic.size(), theta.size(), "finite_diff_check");
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(theta.size()));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  if (theta.size() > opts.full_check_limit) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(static_cast<std::size_t>(
        std::max<Eigen::Index>(opts.subset_size, 200)));
  }
  const double scale = analytic.size() ? analytic.cwiseAbs().maxCoeff() : 0.0;
  Vec probe = theta;
  double worst = 0.0;
  for (Eigen::Index i : coords) {
    probe(i) = theta(i) + opts.step;
    const double plus = value_fn(probe);
    probe(i) = theta(i) - opts.step;
    const double minus = value_fn(probe);
    probe(i) = theta(i);
    const double fd = (plus - minus) / (2.0 * opts.step);
    worst = std::max(worst, relative_error(fd, analytic(i), scale));
  }
  return worst;
}

/// finite_diff_check specialised to probe functionals of an MLP.
template <ProbeFunctional F>
double finite_diff_check(F&& functional, const MlpParams& params,
                         const Eigen::Ref<const Mat>& probes,
                         GradCheckOptions opts = {}) {
  const Vec analytic = param_gradient(params, probes, functional).second;
  MlpParams scratch = params;
  return finite_diff_check(
      [&](const Vec& theta) {
        scratch.flat() = theta;
        return functional_value(scratch, probes, functional);
      },
      params.flat(), analytic, opts);
}

}  // namespace pcbf
