#pragma once

// Training loop for the learned barrier: Pareto three-region updates (PCBF),
// the linear-combination baseline (LCCBF) and the pre-training bound
// estimator.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcbf/barrier.hpp"
#include "pcbf/losses.hpp"
#include "pcbf/pareto.hpp"
#include "pcbf/sampler.hpp"

namespace pcbf {

enum class TrainMode { Pcbf, Lccbf };

struct TrainerConfig {
  TrainMode mode = TrainMode::Pcbf;
  double eta = 1e-3;
  int iterations = 5000;
  double beta = 1.0;
  double eps_lb = 0.0;
  double eps_ub = 0.0;
  double gamma = 1e-2;
  double alpha_slope = 1.0;
  double k = 4.0;
  int batch_size = 1024;
  std::uint64_t seed = 0;
  double lambda_feas = 1.0;
  double lambda_vol = 1.0;
  int pretrain_iterations = 2000;
  double pretrain_threshold = 1e-4;
  int checkpoint_every = 500;
  /// Draw one dataset up front instead of a fresh batch per iteration.
  bool fixed_dataset = false;

  void validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("trainer: " + msg); };
    if (!(eta > 0.0)) fail("eta must be positive");
    if (iterations < 0) fail("iterations must be non-negative");
    if (!(beta > 0.0)) fail("beta must be positive");
    if (!(eps_lb >= 0.0) || !(eps_lb <= eps_ub)) fail("need 0 <= eps_lb <= eps_ub");
    if (!(gamma > 0.0)) fail("gamma must be positive");
    if (!(alpha_slope > 0.0)) fail("alpha_slope must be positive");
    if (!(k > 0.0)) fail("k must be positive");
    if (batch_size <= 0) fail("batch_size must be positive");
    if (lambda_feas < 0.0 || lambda_vol < 0.0) fail("LCCBF weights must be non-negative");
    if (pretrain_iterations < 1) fail("pretrain_iterations must be >= 1");
    if (checkpoint_every < 0) fail("checkpoint_every must be non-negative");
  }

  RegionBounds bounds() const { return {beta, eps_lb, eps_ub}; }
};

struct StepDiagnostics {
  double feas = 0.0;
  double vol = 0.0;
  int n_inside = 0;
  std::optional<Region> region;  // empty for LCCBF steps
  double lambda = 0.0;
  double d_norm = 0.0;
};

namespace detail {
inline void require_finite(const LossPair& losses) {
  if (!std::isfinite(losses.feas) || !std::isfinite(losses.vol) ||
      !losses.grad_feas.allFinite() || !losses.grad_vol.allFinite()) {
    throw NumericalError("non-finite loss or gradient during training");
  }
}
}  // namespace detail

/// One PCBF update from precomputed losses: d from the active region's
/// subproblem, then theta += eta (d - gamma grad vol).
inline StepDiagnostics pcbf_update(Ncbf& barrier, const LossPair& losses,
                                   const RegionBounds& bounds, double eta, double gamma) {
  detail::require_finite(losses);
  const RegionDirection dir =
      pcbf_direction(losses.feas, losses.vol, losses.grad_feas, losses.grad_vol, bounds);
  const Vec& d = dir.direction.d;
  const double dd = d.squaredNorm();
  if (dd > 0.0 && dir.alpha > -0.5 * dd + 1e-12 * (1.0 + dd)) {
    throw NumericalError("common descent direction violates alpha <= -|d|^2/2");
  }
  barrier.network().flat() += eta * (d - gamma * losses.grad_vol);
  return {losses.feas, losses.vol, losses.n_inside, dir.region, dir.direction.lambda,
          std::sqrt(dd)};
}

inline StepDiagnostics pcbf_step(Ncbf& barrier, const Eigen::Ref<const Mat>& batch,
                                 const TrainerConfig& cfg) {
  return pcbf_update(barrier, evaluate_losses(barrier, batch), cfg.bounds(), cfg.eta,
                     cfg.gamma);
}

/// Gradient descent on lambda_feas L_feas + lambda_vol L_vol.
inline StepDiagnostics lccbf_update(Ncbf& barrier, const LossPair& losses,
                                    double lambda_feas, double lambda_vol, double eta) {
  detail::require_finite(losses);
  const Vec step = lambda_feas * losses.grad_feas + lambda_vol * losses.grad_vol;
  barrier.network().flat() -= eta * step;
  return {losses.feas, losses.vol, losses.n_inside, std::nullopt, 0.0, step.norm()};
}

inline StepDiagnostics lccbf_step(Ncbf& barrier, const Eigen::Ref<const Mat>& batch,
                                  const TrainerConfig& cfg) {
  return lccbf_update(barrier, evaluate_losses(barrier, batch), cfg.lambda_feas,
                      cfg.lambda_vol, cfg.eta);
}

struct HistoryRow {
  int iteration = 0;
  double feas = 0.0;
  double vol = 0.0;
  std::string region;  // above | between | below | lccbf
  double d_norm = 0.0;
  double wall_ms = 0.0;
};

/// Stateful single-writer training loop over one barrier.
class Trainer {
 public:
  Trainer(Ncbf barrier, TrainerConfig cfg)
      : barrier_(std::move(barrier)),
        cfg_(cfg),
        sampler_(GaussianSampler::from_width_divisor(barrier_.anchor(),
                                                     barrier_.system().state_box, cfg.k,
                                                     cfg.batch_size, cfg.seed)) {
    cfg_.validate();
    barrier_.set_alpha_slope(cfg_.alpha_slope);
    if (cfg_.fixed_dataset) dataset_ = sampler_.sample();
  }

  const Ncbf& barrier() const { return barrier_; }
  Ncbf& barrier() { return barrier_; }
  const TrainerConfig& config() const { return cfg_; }
  int iteration() const { return iteration_; }

  Mat next_batch() { return cfg_.fixed_dataset ? dataset_ : sampler_.sample(); }

  StepDiagnostics step() { return step(cfg_.mode); }

  StepDiagnostics step(TrainMode mode) {
    const Mat batch = next_batch();
    const LossPair losses = evaluate_losses(barrier_, batch);
    ++iteration_;
    return mode == TrainMode::Pcbf
               ? pcbf_update(barrier_, losses, cfg_.bounds(), cfg_.eta, cfg_.gamma)
               : lccbf_update(barrier_, losses, cfg_.lambda_feas, cfg_.lambda_vol,
                              cfg_.eta);
  }

  void set_bounds(double eps_lb, double eps_ub) {
    cfg_.eps_lb = eps_lb;
    cfg_.eps_ub = eps_ub;
    cfg_.validate();
  }

 private:
  Ncbf barrier_;
  TrainerConfig cfg_;
  GaussianSampler sampler_;
  Mat dataset_;
  int iteration_ = 0;
};

struct BoundEstimate {
  double eps_lb = 0.0;
  double eps_ub = 0.0;
  double vol_star = 0.0;
  double feas_at_star = 0.0;
  int iteration = 0;
  bool threshold_reached = false;
  bool collapsed = false;  // vol_star == 0
};

/// Runs LCCBF until L_feas first drops below the threshold and brackets the
/// volume loss there: (0.5 v*, 2 v*). Falls back to the iterate with the
/// smallest L_feas when the threshold is never reached.
inline BoundEstimate pretrain_estimate_bounds(const Ncbf& initial, TrainerConfig cfg,
                                              std::ostream* log = nullptr) {
  cfg.mode = TrainMode::Lccbf;
  cfg.validate();
  Trainer trainer(initial, cfg);
  BoundEstimate best;
  best.feas_at_star = std::numeric_limits<double>::infinity();
  for (int t = 0; t < cfg.pretrain_iterations; ++t) {
    const StepDiagnostics s = trainer.step();
    if (s.feas < best.feas_at_star) {
      best.feas_at_star = s.feas;
      best.vol_star = s.vol;
      best.iteration = t;
    }
    if (s.feas < cfg.pretrain_threshold) {
      best.threshold_reached = true;
      break;
    }
  }
  if (!best.threshold_reached && log != nullptr) {
    *log << "warning: pre-training never reached L_feas < " << cfg.pretrain_threshold
         << "; using iterate " << best.iteration << " (L_feas = " << best.feas_at_star
         << ")\n";
  }
  best.eps_lb = std::max(0.0, 0.5 * best.vol_star);
  best.eps_ub = 2.0 * best.vol_star;
  best.collapsed = best.vol_star == 0.0;
  return best;
}

/// Bounds from a known v*: (0.5 v*, 2 v*), lower bound clipped at zero.
inline std::pair<double, double> bounds_from_volume(double vol_star) {
  return {std::max(0.0, 0.5 * vol_star), 2.0 * vol_star};
}

struct TrainResult {
  Ncbf barrier;
  std::vector<HistoryRow> history;
};

using CheckpointFn = std::function<void(int iteration, const Ncbf&)>;

/// Runs cfg.iterations steps with the configured mode. `on_checkpoint` fires
/// every cfg.checkpoint_every iterations (and never when that is zero).
inline TrainResult train(const Ncbf& initial, const TrainerConfig& cfg,
                         const CheckpointFn& on_checkpoint = {}) {
  Trainer trainer(initial, cfg);
  std::vector<HistoryRow> history;
  history.reserve(static_cast<std::size_t>(cfg.iterations));
  for (int t = 0; t < cfg.iterations; ++t) {
    const auto start = std::chrono::steady_clock::now();
    const StepDiagnostics s = trainer.step();
    const double ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    history.push_back({t, s.feas, s.vol,
                       s.region ? std::string(region_name(*s.region)) : "lccbf",
                       s.d_norm, ms});
    if (on_checkpoint && cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0) {
      on_checkpoint(t + 1, trainer.barrier());
    }
  }
  return {trainer.barrier(), std::move(history)};
}

}  // namespace pcbf
