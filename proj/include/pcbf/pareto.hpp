#pragma once

// Two-task steepest common descent direction and the three-region rule that
// keeps the loss pair between two parallel bounds in objective space.

#include <algorithm>
#include <string_view>

#include "pcbf/common.hpp"

namespace pcbf {

struct DescentDirection {
  Vec d;
  double lambda = 0.0;
};

/// Solves min_{d, a} a + |d|^2 / 2 s.t. g1.d <= a, g2.d <= a. The solution is
/// d = -lambda g1 - (1 - lambda) g2 with
///   lambda = clamp((g2 - g1).g2 / |g1 - g2|^2, 0, 1),
/// i.e. the minimum-norm point of the segment between -g1 and -g2.
inline DescentDirection solve_base_subproblem(const Eigen::Ref<const Vec>& g1,
                                              const Eigen::Ref<const Vec>& g2) {
  require_dim(g2.size(), g1.size(), "solve_base_subproblem");
  const double denom = (g1 - g2).squaredNorm();
  double lambda = 0.0;
  if (denom >= 1e-24) {
    lambda = std::clamp((g2 - g1).dot(g2) / denom, 0.0, 1.0);
  }
  return {-lambda * g1 - (1.0 - lambda) * g2, lambda};
}

enum class Region { Above, Between, Below };

inline std::string_view region_name(Region r) {
  switch (r) {
    case Region::Above: return "above";
    case Region::Between: return "between";
    case Region::Below: return "below";
  }
  return "?";
}

struct RegionBounds {
  double beta = 1.0;
  double eps_lb = 0.0;
  double eps_ub = 0.0;
};

/// Position of (feas, vol) relative to vol = beta feas + eps_{lb,ub}.
inline Region classify_region(double feas, double vol, const RegionBounds& b) {
  if (vol > b.beta * feas + b.eps_ub) return Region::Above;
  if (vol < b.beta * feas + b.eps_lb) return Region::Below;
  return Region::Between;
}

/// The pair of task gradients whose common descent direction is taken in
/// each region.
inline std::pair<Vec, Vec> region_task_gradients(Region region, const Vec& grad_feas,
                                                 const Vec& grad_vol, double beta) {
  switch (region) {
    case Region::Above:
      return {grad_vol - beta * grad_feas, grad_feas};
    case Region::Between:
      return {grad_feas, grad_vol};
    case Region::Below:
      return {beta * grad_feas - grad_vol, grad_feas};
  }
  return {grad_feas, grad_vol};
}

/// Common descent direction for the region containing (feas, vol).
struct RegionDirection {
  Region region = Region::Between;
  DescentDirection direction;
  /// max(g1.d, g2.d); bounded above by -|d|^2 / 2.
  double alpha = 0.0;
};

inline RegionDirection pcbf_direction(double feas, double vol, const Vec& grad_feas,
                                      const Vec& grad_vol, const RegionBounds& bounds) {
  RegionDirection out;
  out.region = classify_region(feas, vol, bounds);
  const auto [g1, g2] = region_task_gradients(out.region, grad_feas, grad_vol, bounds.beta);
  out.direction = solve_base_subproblem(g1, g2);
  out.alpha = std::max(g1.dot(out.direction.d), g2.dot(out.direction.d));
  return out;
}

}  // namespace pcbf
