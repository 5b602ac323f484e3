#pragma once

// Dense tanh multilayer perceptron with a scalar output, plus the exact
// derivatives the barrier losses need: the input gradient and parameter
// gradients of scalars that themselves contain the input gradient.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcbf/common.hpp"

namespace pcbf {

/// Parameters of a scalar-output MLP stored as one flat vector theta.
///
/// Layer k maps fan_in = sizes[k] to fan_out = sizes[k+1]. Its block in the
/// flat vector is the column-major fan_out x fan_in weight matrix followed by
/// the fan_out biases. Hidden layers use tanh, the output layer is affine.
class MlpParams {
 public:
  MlpParams() = default;

  /// Zero-initialized parameters for the given layer sizes.
  explicit MlpParams(std::vector<int> layer_sizes)
      : sizes_(std::move(layer_sizes)) {
    validate_sizes(sizes_);
    offsets_.reserve(sizes_.size());
    Eigen::Index offset = 0;
    for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
      offsets_.push_back(offset);
      offset += static_cast<Eigen::Index>(sizes_[k] + 1) * sizes_[k + 1];
    }
    offsets_.push_back(offset);
    theta_ = Vec::Zero(offset);
  }

  /// Rebuilds parameters from a flat vector (inverse of flat()).
  static MlpParams from_flat(std::vector<int> layer_sizes, const Vec& theta) {
    MlpParams p(std::move(layer_sizes));
    require_dim(theta.size(), p.size(), "MlpParams::from_flat");
    p.theta_ = theta;
    return p;
  }

  static void validate_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) {
      throw std::invalid_argument("layer_sizes needs at least input and output");
    }
    for (int s : sizes) {
      if (s <= 0) throw std::invalid_argument("layer_sizes must be positive");
    }
    if (sizes.back() != 1) {
      throw std::invalid_argument("network output dimension must be 1");
    }
  }

  const std::vector<int>& layer_sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  /// Number of affine layers.
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  Eigen::Index size() const { return theta_.size(); }
  bool empty() const { return sizes_.empty(); }

  const Vec& flat() const { return theta_; }
  Vec& flat() { return theta_; }

  Eigen::Map<const Mat> weight(int k) const {
    return {theta_.data() + offsets_[k], sizes_[k + 1], sizes_[k]};
  }
  Eigen::Map<Mat> weight(int k) {
    return {theta_.data() + offsets_[k], sizes_[k + 1], sizes_[k]};
  }
  Eigen::Map<const Vec> bias(int k) const {
    return {theta_.data() + offsets_[k] + Eigen::Index{sizes_[k]} * sizes_[k + 1],
            sizes_[k + 1]};
  }
  Eigen::Map<Vec> bias(int k) {
    return {theta_.data() + offsets_[k] + Eigen::Index{sizes_[k]} * sizes_[k + 1],
            sizes_[k + 1]};
  }

  /// Offset of layer k's block inside flat().
  Eigen::Index offset(int k) const { return offsets_[k]; }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Vec theta_;
};

/// Parameter count for the given layer sizes: sum of (fan_in + 1) * fan_out.
inline Eigen::Index parameter_count(const std::vector<int>& layer_sizes) {
  MlpParams::validate_sizes(layer_sizes);
  Eigen::Index p = 0;
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    p += static_cast<Eigen::Index>(layer_sizes[k] + 1) * layer_sizes[k + 1];
  }
  return p;
}

/// Gaussian weights with standard deviation 1/sqrt(fan_in), zero biases.
inline MlpParams mlp_init(const std::vector<int>& layer_sizes,
                          std::uint64_t seed) {
  MlpParams params(layer_sizes);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int k = 0; k < params.num_layers(); ++k) {
    auto w = params.weight(k);
    const double scale = 1.0 / std::sqrt(static_cast<double>(w.cols()));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * normal(rng);
    }
  }
  return params;
}

/// Forward activations of a batch of inputs (one per column), kept so that
/// the input gradient and any number of parameter-gradient passes can reuse
/// them. Holds a reference to the parameters, which must outlive the tape.
class MlpTape {
 public:
  MlpTape(const MlpParams& params, const Eigen::Ref<const Mat>& inputs)
      : params_(&params) {
    require_dim(inputs.rows(), params.input_dim(), "MlpTape inputs");
    const int layers = params.num_layers();
    const Eigen::Index n = inputs.cols();
    act_.resize(layers);
    dact_.resize(layers);
    act_[0] = inputs;
    for (int k = 0; k + 1 < layers; ++k) {
      Mat z = params.weight(k) * act_[k];
      z.colwise() += params.bias(k);
      act_[k + 1] = z.array().tanh().matrix();
      dact_[k + 1] = (1.0 - act_[k + 1].array().square()).matrix();
    }
    values_ = params.weight(layers - 1) * act_[layers - 1];
    values_.array() += params.bias(layers - 1)(0);
    (void)n;
  }

  Eigen::Index batch_size() const { return act_[0].cols(); }

  /// Network outputs, one per input column.
  const RowVec& values() const { return values_; }

  /// Input gradients, one column per input (computed on first request).
  const Mat& input_gradients() {
    ensure_input_gradients();
    return input_grad_adj_[0];
  }

  /// Gradient with respect to theta of
  ///   sum_i dvalues(i) * nn(x_i) + sum_i dgrads.col(i) . grad_x nn(x_i).
  /// `dgrads` may be null when the scalar does not depend on input gradients.
  Vec param_gradient(const RowVec& dvalues, const Mat* dgrads) {
    require_dim(dvalues.size(), batch_size(), "param_gradient adjoint");
    const MlpParams& p = *params_;
    const int layers = p.num_layers();
    Vec grad = Vec::Zero(p.size());
    auto grad_w = [&](int k) {
      return Eigen::Map<Mat>(grad.data() + p.offset(k), p.layer_sizes()[k + 1],
                             p.layer_sizes()[k]);
    };
    auto grad_b = [&](int k) {
      return Eigen::Map<Vec>(
          grad.data() + p.offset(k) +
              Eigen::Index{p.layer_sizes()[k]} * p.layer_sizes()[k + 1],
          p.layer_sizes()[k + 1]);
    };

    // Tangent pass along the per-column directions dgrads.
    std::vector<Mat> tan, tan_pre;
    if (dgrads != nullptr) {
      require_dim(dgrads->rows(), p.input_dim(), "param_gradient dgrads rows");
      require_dim(dgrads->cols(), batch_size(), "param_gradient dgrads cols");
      ensure_input_gradients();
      tan.resize(layers);
      tan_pre.resize(layers);
      tan[0] = *dgrads;
      for (int k = 1; k < layers; ++k) {
        tan_pre[k] = p.weight(k - 1) * tan[k - 1];
        tan[k] = dact_[k].cwiseProduct(tan_pre[k]);
      }
    }

    const int top = layers - 1;
    auto gw_top = grad_w(top);
    gw_top.noalias() = dvalues * act_[top].transpose();
    if (dgrads != nullptr) gw_top += tan[top].rowwise().sum().transpose();
    grad_b(top)(0) = dvalues.sum();

    // adj: adjoint of the primal activation act_[k].
    Mat adj = p.weight(top).transpose() * dvalues;
    for (int k = top; k >= 1; --k) {
      Mat zbar = adj.cwiseProduct(dact_[k]);
      if (dgrads != nullptr) {
        // The input-gradient adjoint of act_[k] is input_grad_adj_[k]; it
        // multiplies d(tanh')/dz = -2 a (1 - a^2) along the tangent.
        zbar.array() -= 2.0 * input_grad_adj_[k].array() * act_[k].array() *
                        dact_[k].array() * tan_pre[k].array();
      }
      auto gw = grad_w(k - 1);
      gw.noalias() = zbar * act_[k - 1].transpose();
      if (dgrads != nullptr) {
        gw.noalias() += pre_adj_[k] * tan[k - 1].transpose();
      }
      grad_b(k - 1) = zbar.rowwise().sum();
      if (k > 1) adj = p.weight(k - 1).transpose() * zbar;
    }
    return grad;
  }

 private:
  void ensure_input_gradients() {
    if (!input_grad_adj_.empty()) return;
    const MlpParams& p = *params_;
    const int layers = p.num_layers();
    const Eigen::Index n = batch_size();
    input_grad_adj_.resize(layers);
    pre_adj_.resize(layers);
    input_grad_adj_[layers - 1] =
        p.weight(layers - 1).transpose() * RowVec::Ones(n);
    for (int k = layers - 1; k >= 1; --k) {
      pre_adj_[k] = input_grad_adj_[k].cwiseProduct(dact_[k]);
      input_grad_adj_[k - 1] = p.weight(k - 1).transpose() * pre_adj_[k];
    }
  }

  const MlpParams* params_;
  std::vector<Mat> act_;   // act_[0] = inputs, act_[k] = tanh output of layer k-1
  std::vector<Mat> dact_;  // 1 - act_^2
  RowVec values_;
  std::vector<Mat> input_grad_adj_;  // d(sum nn)/d act_[k]
  std::vector<Mat> pre_adj_;         // d(sum nn)/d pre-activation feeding act_[k]
};

inline double mlp_forward(const MlpParams& params, const Eigen::Ref<const Vec>& x) {
  require_dim(x.size(), params.input_dim(), "mlp_forward");
  MlpTape tape(params, x);
  return tape.values()(0);
}

inline Vec mlp_input_gradient(const MlpParams& params,
                              const Eigen::Ref<const Vec>& x) {
  require_dim(x.size(), params.input_dim(), "mlp_input_gradient");
  MlpTape tape(params, x);
  return tape.input_gradients().col(0);
}

/// Value and input gradient from a single forward/backward pass.
struct DualEval {
  double value = 0.0;
  Vec input_grad;
  Vec param_grad;  // empty unless requested
};

inline DualEval mlp_eval(const MlpParams& params, const Eigen::Ref<const Vec>& x) {
  require_dim(x.size(), params.input_dim(), "mlp_eval");
  MlpTape tape(params, x);
  return {tape.values()(0), tape.input_gradients().col(0), {}};
}

/// A scalar functional of network outputs and input gradients at fixed probe
/// points. Called as f(values, input_grads, dvalues, dgrads); when the adjoint
/// pointers are non-null it must fill them with the partial derivatives of the
/// returned scalar with respect to values and input_grads.
template <typename F>
concept ProbeFunctional =
    requires(F f, const RowVec& y, const Mat& g, RowVec* dy, Mat* dg) {
      { f(y, g, dy, dg) } -> std::convertible_to<double>;
    };

/// Value of a probe functional (no derivatives).
template <ProbeFunctional F>
double functional_value(const MlpParams& params,
                        const Eigen::Ref<const Mat>& probes, F&& functional) {
  MlpTape tape(params, probes);
  return functional(tape.values(), tape.input_gradients(), nullptr, nullptr);
}

/// Exact gradient with respect to theta of a probe functional, including the
/// mixed second-derivative terms reached through input gradients.
template <ProbeFunctional F>
std::pair<double, Vec> param_gradient(const MlpParams& params,
                                      const Eigen::Ref<const Mat>& probes,
                                      F&& functional) {
  MlpTape tape(params, probes);
  RowVec dy = RowVec::Zero(probes.cols());
  Mat dg = Mat::Zero(probes.rows(), probes.cols());
  const double value =
      functional(tape.values(), tape.input_gradients(), &dy, &dg);
  return {value, tape.param_gradient(dy, &dg)};
}

}  // namespace pcbf
