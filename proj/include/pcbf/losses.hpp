#pragma once

// Feasibility and volume losses over a batch of sampled states, with exact
// theta-gradients. Membership in the learned set and the inside count are
// held constant when differentiating.

#include <algorithm>
#include <limits>
#include <vector>

#include "pcbf/barrier.hpp"

namespace pcbf {

struct LossPair {
  double feas = 0.0;
  double vol = 0.0;
  Vec grad_feas;
  Vec grad_vol;
  int n_inside = 0;
};

/// Distance of a batch evaluation from the loci where the losses are not
/// differentiable: membership boundary, hinge at zero, and argmax ties.
struct TieMargins {
  double membership = std::numeric_limits<double>::infinity();
  double hinge = std::numeric_limits<double>::infinity();
  double argmax = std::numeric_limits<double>::infinity();
  double min() const { return std::min({membership, hinge, argmax}); }
};

/// Smallest distance of one state from the three non-differentiable loci.
inline double tie_margin(const Ncbf& barrier, const Eigen::Ref<const Vec>& x) {
  const BarrierEval e = barrier.evaluate(x);
  const RowVec scores = e.lie_g.transpose() * barrier.input_vertices();
  double gap = std::numeric_limits<double>::infinity();
  const SupPhi s = barrier.sup_phi(e);
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    if (j != s.vertex) gap = std::min(gap, scores(s.vertex) - scores(j));
  }
  return std::min({std::abs(e.value), std::abs(s.value), gap});
}

/// Scenario quantities at each batch state; independent of theta.
struct BatchScenario {
  Mat states;              // n x N
  RowVec margin;           // h(x_i)
  Mat margin_grad;         // grad h(x_i), n x N
  Mat drift;               // f(x_i), n x N
  std::vector<Mat> actuation;  // g(x_i), n x m each

  BatchScenario(const ControlAffineSystem& sys, const Eigen::Ref<const Mat>& batch)
      : states(batch),
        margin(batch.cols()),
        margin_grad(batch.rows(), batch.cols()),
        drift(batch.rows(), batch.cols()) {
    require_dim(batch.rows(), sys.state_dim(), "BatchScenario states");
    actuation.reserve(static_cast<std::size_t>(batch.cols()));
    for (Eigen::Index i = 0; i < batch.cols(); ++i) {
      const Vec x = batch.col(i);
      const MarginEval h = sys.safe_margin(x);
      margin(i) = h.value;
      margin_grad.col(i) = h.gradient;
      drift.col(i) = sys.drift(x);
      actuation.push_back(sys.actuation(x));
    }
  }

  Eigen::Index size() const { return states.cols(); }

  /// The batch with the anchor appended as the last column.
  Mat probes(const Vec& anchor) const {
    Mat out(states.rows(), states.cols() + 1);
    out.leftCols(states.cols()) = states;
    out.col(states.cols()) = anchor;
    return out;
  }
};

/// Mean hinge penalty max(0, -max_{u in V(U)} phi(x_i, u)) over batch states
/// inside the learned set. Probe layout: batch columns, then the anchor.
class FeasibilityFunctional {
 public:
  FeasibilityFunctional(const Ncbf& barrier, const BatchScenario& scenario)
      : barrier_(&barrier), scenario_(&scenario) {}

  double operator()(const RowVec& y, const Mat& grads, RowVec* dy, Mat* dg) {
    const BatchScenario& sc = *scenario_;
    const Mat& verts = barrier_->input_vertices();
    const double c = barrier_->alpha_slope();
    const Eigen::Index n_batch = sc.size();
    const double ye = y(n_batch);
    ties_ = {};
    inside_ = 0;
    struct Active {
      Eigen::Index i;
      double dev;
      Vec v;
    };
    std::vector<Active> active;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n_batch; ++i) {
      const double dev = y(i) - ye;
      const double h_theta = sc.margin(i) - dev * dev;
      ties_.membership = std::min(ties_.membership, std::abs(h_theta));
      if (h_theta < 0.0) continue;
      ++inside_;
      const Vec grad = sc.margin_grad.col(i) - 2.0 * dev * grads.col(i);
      const Vec lie_g = sc.actuation[static_cast<std::size_t>(i)].transpose() * grad;
      const RowVec scores = lie_g.transpose() * verts;
      Eigen::Index best = 0;
      double second = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 1; j < scores.size(); ++j) {
        if (scores(j) > scores(best)) {
          second = scores(best);
          best = j;
        } else {
          second = std::max(second, scores(j));
        }
      }
      if (scores.size() > 1) {
        ties_.argmax = std::min(ties_.argmax, scores(best) - second);
      }
      const double sup =
          grad.dot(sc.drift.col(i)) + scores(best) + c * h_theta;
      ties_.hinge = std::min(ties_.hinge, std::abs(sup));
      if (sup < 0.0) {
        total -= sup;
        if (dy != nullptr) {
          active.push_back({i, dev,
                            sc.drift.col(i) + sc.actuation[static_cast<std::size_t>(i)] *
                                                  verts.col(best)});
        }
      }
    }
    if (inside_ == 0) return 0.0;
    const double inv = 1.0 / inside_;
    if (dy != nullptr) {
      for (const Active& a : active) {
        const double s = grads.col(a.i).dot(a.v);
        const double d_value = (2.0 * s + 2.0 * c * a.dev) * inv;
        (*dy)(a.i) += d_value;
        (*dy)(n_batch) -= d_value;
        dg->col(a.i) += (2.0 * a.dev * inv) * a.v;
      }
    }
    return total * inv;
  }

  int inside() const { return inside_; }
  const TieMargins& ties() const { return ties_; }

 private:
  const Ncbf* barrier_;
  const BatchScenario* scenario_;
  int inside_ = 0;
  TieMargins ties_;
};

/// Mean of (nn(x_i) - nn(x_e))^2 over batch states inside the learned set.
class VolumeFunctional {
 public:
  explicit VolumeFunctional(const BatchScenario& scenario) : scenario_(&scenario) {}

  double operator()(const RowVec& y, const Mat& /*grads*/, RowVec* dy, Mat* /*dg*/) {
    const BatchScenario& sc = *scenario_;
    const Eigen::Index n_batch = sc.size();
    const double ye = y(n_batch);
    inside_ = 0;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n_batch; ++i) {
      const double dev = y(i) - ye;
      if (sc.margin(i) - dev * dev < 0.0) continue;
      ++inside_;
      total += dev * dev;
    }
    if (inside_ == 0) return 0.0;
    const double inv = 1.0 / inside_;
    if (dy != nullptr) {
      for (Eigen::Index i = 0; i < n_batch; ++i) {
        const double dev = y(i) - ye;
        if (sc.margin(i) - dev * dev < 0.0) continue;
        (*dy)(i) += 2.0 * dev * inv;
        (*dy)(n_batch) -= 2.0 * dev * inv;
      }
    }
    return total * inv;
  }

  int inside() const { return inside_; }

 private:
  const BatchScenario* scenario_;
  int inside_ = 0;
};

/// Both losses and their theta-gradients from one shared forward pass.
inline LossPair evaluate_losses(const Ncbf& barrier, const Eigen::Ref<const Mat>& batch,
                                TieMargins* ties = nullptr) {
  if (batch.cols() == 0) throw std::invalid_argument("evaluate_losses: empty batch");
  const BatchScenario sc(barrier.system(), batch);
  const Mat probes = sc.probes(barrier.anchor());
  MlpTape tape(barrier.network(), probes);
  const Mat& grads = tape.input_gradients();

  LossPair out;
  FeasibilityFunctional feas(barrier, sc);
  RowVec dy = RowVec::Zero(probes.cols());
  Mat dg = Mat::Zero(probes.rows(), probes.cols());
  out.feas = feas(tape.values(), grads, &dy, &dg);
  out.grad_feas = out.feas > 0.0 ? tape.param_gradient(dy, &dg)
                                 : Vec::Zero(barrier.network().size());
  out.n_inside = feas.inside();
  if (ties != nullptr) *ties = feas.ties();

  VolumeFunctional vol(sc);
  dy.setZero();
  out.vol = vol(tape.values(), grads, &dy, nullptr);
  out.grad_vol = tape.param_gradient(dy, nullptr);
  return out;
}

inline LossPair feasibility_loss(const Ncbf& barrier, const Eigen::Ref<const Mat>& batch) {
  const BatchScenario sc(barrier.system(), batch);
  LossPair out;
  FeasibilityFunctional f(barrier, sc);
  std::tie(out.feas, out.grad_feas) =
      param_gradient(barrier.network(), sc.probes(barrier.anchor()), f);
  out.n_inside = f.inside();
  return out;
}

inline LossPair volume_loss(const Ncbf& barrier, const Eigen::Ref<const Mat>& batch) {
  const BatchScenario sc(barrier.system(), batch);
  LossPair out;
  VolumeFunctional f(sc);
  std::tie(out.vol, out.grad_vol) =
      param_gradient(barrier.network(), sc.probes(barrier.anchor()), f);
  out.n_inside = f.inside();
  return out;
}

}  // namespace pcbf
