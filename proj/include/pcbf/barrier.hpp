#pragma once

// Learned barrier h_theta(x) = h(x) - (nn(x) - nn(x_e))^2 anchored at a known
// safe state x_e, together with the CBF residual
//   phi(x, u) = L_f h_theta(x) + L_g h_theta(x) u + c h_theta(x)
// and its maximum over the input box.

#include <memory>
#include <utility>

#include "pcbf/mlp.hpp"
#include "pcbf/systems.hpp"

namespace pcbf {

struct SupPhi {
  double value = 0.0;
  int vertex = 0;
};

/// Barrier value plus the pieces of the CBF condition at one state.
struct BarrierEval {
  double value = 0.0;   // h_theta(x)
  Vec gradient;         // grad h_theta(x)
  double lie_f = 0.0;   // grad h_theta . f(x)
  Vec lie_g;            // g(x)^T grad h_theta (length m)
};

class Ncbf {
 public:
  Ncbf(MlpParams network, Vec anchor,
       std::shared_ptr<const ControlAffineSystem> system, double alpha_slope = 1.0)
      : net_(std::move(network)),
        anchor_(std::move(anchor)),
        sys_(std::move(system)),
        alpha_(alpha_slope) {
    if (!sys_) throw std::invalid_argument("Ncbf: null system");
    require_dim(net_.input_dim(), sys_->state_dim(), "Ncbf network input");
    require_dim(anchor_.size(), sys_->state_dim(), "Ncbf anchor");
    if (!(alpha_ > 0.0)) throw std::invalid_argument("Ncbf: alpha slope must be positive");
    if (!(sys_->safe_margin(anchor_).value > 0.0)) {
      throw std::invalid_argument("Ncbf: anchor state must satisfy h(x_e) > 0");
    }
    vertices_ = vertices(sys_->input_box);
  }

  const MlpParams& network() const { return net_; }
  MlpParams& network() { return net_; }
  const Vec& anchor() const { return anchor_; }
  const ControlAffineSystem& system() const { return *sys_; }
  std::shared_ptr<const ControlAffineSystem> system_ptr() const { return sys_; }
  double alpha_slope() const { return alpha_; }
  void set_alpha_slope(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("Ncbf: alpha slope must be positive");
    alpha_ = c;
  }
  /// Input-box corners, one per column (see vertices()).
  const Mat& input_vertices() const { return vertices_; }

  double anchor_output() const { return mlp_forward(net_, anchor_); }

  double value(const Eigen::Ref<const Vec>& x) const {
    require_dim(x.size(), sys_->state_dim(), "Ncbf::value");
    const double dev = mlp_forward(net_, x) - anchor_output();
    return sys_->safe_margin(x).value - dev * dev;
  }

  Vec gradient(const Eigen::Ref<const Vec>& x) const {
    return evaluate(x).gradient;
  }

  /// Value, gradient and Lie derivatives from one network pass.
  BarrierEval evaluate(const Eigen::Ref<const Vec>& x) const {
    require_dim(x.size(), sys_->state_dim(), "Ncbf::evaluate");
    const Vec xv = x;
    const DualEval nn = mlp_eval(net_, xv);
    const double dev = nn.value - anchor_output();
    const MarginEval h = sys_->safe_margin(xv);
    BarrierEval out;
    out.value = h.value - dev * dev;
    out.gradient = h.gradient - 2.0 * dev * nn.input_grad;
    out.lie_f = out.gradient.dot(sys_->drift(xv));
    out.lie_g = sys_->actuation(xv).transpose() * out.gradient;
    return out;
  }

  double phi(const Eigen::Ref<const Vec>& x, const Eigen::Ref<const Vec>& u) const {
    require_dim(u.size(), sys_->input_dim(), "Ncbf::phi input");
    const BarrierEval b = evaluate(x);
    return b.lie_f + b.lie_g.dot(u) + alpha_ * b.value;
  }

  /// max over input-box vertices of phi(x, .). Ties go to the lowest index.
  SupPhi sup_phi(const Eigen::Ref<const Vec>& x) const {
    return sup_phi(evaluate(x));
  }

  SupPhi sup_phi(const BarrierEval& b) const {
    const RowVec scores = b.lie_g.transpose() * vertices_;
    SupPhi out{scores(0), 0};
    for (Eigen::Index j = 1; j < scores.size(); ++j) {
      if (scores(j) > out.value) out = {scores(j), static_cast<int>(j)};
    }
    out.value += b.lie_f + alpha_ * b.value;
    return out;
  }

  bool membership(const Eigen::Ref<const Vec>& x) const { return value(x) >= 0.0; }

  /// Barrier values for a batch of states (one per column).
  RowVec values(const Eigen::Ref<const Mat>& states) const {
    require_dim(states.rows(), sys_->state_dim(), "Ncbf::values");
    MlpTape tape(net_, states);
    const double ye = anchor_output();
    RowVec out(states.cols());
    for (Eigen::Index i = 0; i < states.cols(); ++i) {
      const double dev = tape.values()(i) - ye;
      out(i) = sys_->safe_margin(states.col(i)).value - dev * dev;
    }
    return out;
  }

 private:
  MlpParams net_;
  Vec anchor_;
  std::shared_ptr<const ControlAffineSystem> sys_;
  double alpha_;
  Mat vertices_;
};

inline double barrier_value(const Ncbf& b, const Eigen::Ref<const Vec>& x) {
  return b.value(x);
}
inline Vec barrier_gradient(const Ncbf& b, const Eigen::Ref<const Vec>& x) {
  return b.gradient(x);
}
inline double phi(const Ncbf& b, const Eigen::Ref<const Vec>& x,
                  const Eigen::Ref<const Vec>& u) {
  return b.phi(x, u);
}
inline SupPhi sup_phi(const Ncbf& b, const Eigen::Ref<const Vec>& x) {
  return b.sup_phi(x);
}
inline bool membership(const Ncbf& b, const Eigen::Ref<const Vec>& x) {
  return b.membership(x);
}

}  // namespace pcbf
