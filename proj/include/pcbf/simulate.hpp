#pragma once

// Closed-loop simulation with an optional CBF-QP safety filter.

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>

#include "pcbf/nominal.hpp"
#include "pcbf/qp_filter.hpp"

namespace pcbf {

/// States are columns, sampled at t_k = k dt. Inputs and flags are per step,
/// so they have one column fewer than the states.
struct Trajectory {
  Vec times;
  Mat states;
  Mat u_nominal;
  Mat u_applied;
  Vec h;                          // scenario margin at every state
  Vec h_theta;                    // learned barrier, NaN when unfiltered
  std::vector<char> filter_active;
  std::vector<char> infeasible;
  double min_h = std::numeric_limits<double>::infinity();
  double min_h_theta = std::numeric_limits<double>::infinity();
  int active_steps = 0;
  int infeasible_steps = 0;
  bool aborted = false;           // stopped early on a non-finite state
  std::string abort_reason;

  int steps() const { return static_cast<int>(u_applied.cols()); }
};

inline Trajectory simulate(const ControlAffineSystem& sys, const Ncbf* barrier,
                           const NominalPolicy& policy, const Eigen::Ref<const Vec>& x0,
                           double duration, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
  if (!(duration >= 0.0)) throw std::invalid_argument("simulate: duration must be >= 0");
  require_dim(x0.size(), sys.state_dim(), "simulate x0");
  if (barrier && &barrier->system() != &sys && barrier->system().id != sys.id) {
    throw std::invalid_argument("simulate: barrier was trained for another scenario");
  }
  const int n = sys.state_dim(), m = sys.input_dim();
  const int steps = static_cast<int>(std::llround(duration / dt));

  Trajectory tr;
  tr.states.resize(n, steps + 1);
  tr.u_nominal.resize(m, steps);
  tr.u_applied.resize(m, steps);
  tr.h.resize(steps + 1);
  tr.h_theta.setConstant(steps + 1, std::numeric_limits<double>::quiet_NaN());
  tr.times.resize(steps + 1);
  tr.filter_active.assign(static_cast<std::size_t>(steps), 0);
  tr.infeasible.assign(static_cast<std::size_t>(steps), 0);

  auto record_state = [&](int k, const Vec& x) {
    tr.states.col(k) = x;
    tr.times(k) = k * dt;
    tr.h(k) = sys.safe_margin(x).value;
    tr.min_h = std::min(tr.min_h, tr.h(k));
    if (barrier) {
      tr.h_theta(k) = barrier->value(x);
      tr.min_h_theta = std::min(tr.min_h_theta, tr.h_theta(k));
    }
  };

  Vec x = x0;
  record_state(0, x);
  int done = 0;
  for (int k = 0; k < steps; ++k) {
    const Vec u_nom = nominal_eval(policy, sys, x, k * dt);
    Vec u = u_nom;
    if (barrier) {
      const FilterResult fr = cbf_qp_filter(*barrier, x, u_nom);
      u = fr.u;
      tr.filter_active[k] = fr.active;
      tr.infeasible[k] = fr.infeasible;
      tr.active_steps += fr.active;
      tr.infeasible_steps += fr.infeasible;
    }
    tr.u_nominal.col(k) = u_nom;
    tr.u_applied.col(k) = u;
    try {
      x = rk4_step(sys, x, u, dt);
    } catch (const NumericalError& e) {
      tr.aborted = true;
      tr.abort_reason = e.what();
      done = k + 1;
      break;
    }
    record_state(k + 1, x);
    done = k + 1;
  }
  if (tr.aborted) {
    // Keep the states that were reached; drop the input of the failing step.
    tr.states.conservativeResize(n, done);
    tr.times.conservativeResize(done);
    tr.h.conservativeResize(done);
    tr.h_theta.conservativeResize(done);
    tr.u_nominal.conservativeResize(m, done - 1);
    tr.u_applied.conservativeResize(m, done - 1);
    tr.filter_active.resize(static_cast<std::size_t>(done - 1));
    tr.infeasible.resize(static_cast<std::size_t>(done - 1));
  }
  return tr;
}

/// Columns: t, x0..x{n-1}, unom0.., u0.., h, h_theta, filter_active,
/// infeasible. The final state row leaves the input and flag fields empty.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& tr) {
  const auto n = tr.states.rows();
  const auto m = tr.u_applied.rows();
  out << "t";
  for (Eigen::Index i = 0; i < n; ++i) out << ",x" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",u_nom" << i;
  for (Eigen::Index i = 0; i < m; ++i) out << ",u" << i;
  out << ",h,h_theta,filter_active,infeasible\n";
  out.precision(17);
  for (Eigen::Index k = 0; k < tr.states.cols(); ++k) {
    out << tr.times(k);
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << tr.states(i, k);
    const bool has_input = k < tr.u_applied.cols();
    for (Eigen::Index i = 0; i < m; ++i) {
      out << ',';
      if (has_input) out << tr.u_nominal(i, k);
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      out << ',';
      if (has_input) out << tr.u_applied(i, k);
    }
    out << ',' << tr.h(k) << ',';
    if (!std::isnan(tr.h_theta(k))) out << tr.h_theta(k);
    out << ',';
    if (has_input) out << int(tr.filter_active[k]);
    out << ',';
    if (has_input) out << int(tr.infeasible[k]);
    out << '\n';
  }
}

}  // namespace pcbf
