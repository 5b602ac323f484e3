#pragma once

// Minimal-deviation safety filter
//   min |u - u_nom|^2  s.t.  a.u >= b,  lo <= u <= hi
// solved exactly by enumerating which coordinates sit at a bound.

#include <cmath>
#include <limits>

#include "pcbf/barrier.hpp"

namespace pcbf {

struct FilterResult {
  Vec u;
  bool active = false;      // u differs from the clipped nominal
  bool infeasible = false;  // no input in the box satisfies a.u >= b
};

/// Exact projection onto {a.u >= b} intersected with the box. For each of
/// the 3^m assignments (free / at lower / at upper) the free coordinates are
/// moved along a_F by the smallest non-negative multiplier that reaches the
/// halfspace; the best feasible candidate is the optimum. When the halfspace
/// misses the box, returns the vertex maximizing a.u.
inline FilterResult project_halfspace_box(const Eigen::Ref<const Vec>& u_nom,
                                          const Eigen::Ref<const Vec>& a, double b,
                                          const Box& box, double tol = 1e-10) {
  const int m = box.dim();
  require_dim(u_nom.size(), m, "project_halfspace_box u_nom");
  require_dim(a.size(), m, "project_halfspace_box a");
  if (m > 8) throw std::invalid_argument("project_halfspace_box: input dimension too large");

  FilterResult out;
  const Vec clipped = box.clip(u_nom);

  // Best achievable a.u over the box decides feasibility.
  Vec best_vertex(m);
  for (int i = 0; i < m; ++i) best_vertex(i) = a(i) >= 0.0 ? box.hi(i) : box.lo(i);
  if (a.dot(best_vertex) < b - tol) {
    out.u = best_vertex;
    out.infeasible = true;
    out.active = true;
    return out;
  }
  // Points returned by an earlier projection sit on the boundary up to
  // rounding; accepting them keeps the filter idempotent.
  if (a.dot(clipped) >= b - tol) {
    out.u = clipped;
    return out;
  }

  double best_cost = std::numeric_limits<double>::infinity();
  Vec candidate(m);
  int combos = 1;
  for (int i = 0; i < m; ++i) combos *= 3;
  for (int code = 0; code < combos; ++code) {
    int rest = code;
    double fixed_dot = 0.0, free_dot = 0.0, free_norm = 0.0;
    for (int i = 0; i < m; ++i) {
      const int state = rest % 3;
      rest /= 3;
      if (state == 0) {
        candidate(i) = u_nom(i);
        free_dot += a(i) * u_nom(i);
        free_norm += a(i) * a(i);
      } else {
        candidate(i) = state == 1 ? box.lo(i) : box.hi(i);
        fixed_dot += a(i) * candidate(i);
      }
    }
    const double gap = b - fixed_dot - free_dot;
    if (gap > 0.0) {
      if (free_norm == 0.0) continue;
      const double mu = gap / free_norm;
      rest = code;
      for (int i = 0; i < m; ++i, rest /= 3) {
        if (rest % 3 == 0) candidate(i) += mu * a(i);
      }
    }
    if (!box.contains(candidate, tol) || a.dot(candidate) < b - tol) continue;
    const double cost = (candidate - u_nom).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      out.u = box.clip(candidate);
    }
  }
  if (!std::isfinite(best_cost)) {
    // Degenerate numerics; the maximizing vertex is always admissible here.
    out.u = best_vertex;
  }
  out.active = true;
  return out;
}

/// CBF-QP: a = L_g h_theta(x), b = -L_f h_theta(x) - c h_theta(x).
inline FilterResult cbf_qp_filter(const Ncbf& barrier, const Eigen::Ref<const Vec>& x,
                                  const Eigen::Ref<const Vec>& u_nom) {
  const BarrierEval e = barrier.evaluate(x);
  return project_halfspace_box(u_nom, e.lie_g, -e.lie_f - barrier.alpha_slope() * e.value,
                               barrier.system().input_box);
}

}  // namespace pcbf
