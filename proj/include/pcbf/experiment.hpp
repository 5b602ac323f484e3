#pragma once

// Glue between an ExperimentConfig and the training loop, shared by the CLI
// and the acceptance harness.

#include <optional>
#include <ostream>

#include "pcbf/config.hpp"
#include "pcbf/trainer.hpp"

namespace pcbf {

inline Ncbf initial_barrier(const ExperimentConfig& cfg) {
  auto sys = cfg.make_system();
  const int n = sys->state_dim();
  return Ncbf(mlp_init(cfg.layer_sizes(n), cfg.network.init_seed), cfg.anchor_state(n),
              std::move(sys), cfg.trainer.alpha_slope);
}

struct ExperimentRun {
  TrainResult result;
  TrainerConfig trainer;               // as used, bounds filled in
  std::optional<BoundEstimate> bounds;  // set when estimated by pre-training
};

/// Trains from the configured initial network in the configured mode. PCBF
/// runs with auto_bounds first estimate (eps_lb, eps_ub) by LCCBF
/// pre-training from the same initial network.
inline ExperimentRun run_experiment(const ExperimentConfig& cfg, std::ostream* log = nullptr,
                                    const CheckpointFn& on_checkpoint = {}) {
  const Ncbf init = initial_barrier(cfg);
  ExperimentRun run{{init, {}}, cfg.trainer, std::nullopt};
  if (cfg.trainer.mode == TrainMode::Pcbf && cfg.auto_bounds) {
    run.bounds = pretrain_estimate_bounds(init, cfg.trainer, log);
    run.trainer.eps_lb = run.bounds->eps_lb;
    run.trainer.eps_ub = run.bounds->eps_ub;
    if (log) {
      *log << "bounds: eps_lb = " << run.trainer.eps_lb << ", eps_ub = " << run.trainer.eps_ub
           << " (v* = " << run.bounds->vol_star << " at pre-training iteration "
           << run.bounds->iteration << ")\n";
    }
  }
  run.result = train(init, run.trainer, on_checkpoint);
  return run;
}

}  // namespace pcbf
