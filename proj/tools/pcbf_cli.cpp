// pcbf: experiment driver.
//
//   pcbf train    --config C [--set k=v ...] [--seeds 1,2,3 --jobs N]
//   pcbf kernel   --config C
//   pcbf compare  --config C --checkpoint P [--kernel kernel.csv]
//   pcbf volume   --config C --checkpoint P [--baseline Q]
//   pcbf slice    --config C --checkpoint P
//   pcbf simulate --config C [--checkpoint P] [--runs N --jobs N]
//
// Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
// 4 finished with non-convergence warnings.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "pcbf/checkpoint.hpp"
#include "pcbf/experiment.hpp"
#include "pcbf/hjgrid.hpp"
#include "pcbf/manifest.hpp"
#include "pcbf/simulate.hpp"
#include "pcbf/volume.hpp"

using namespace pcbf;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitWarning = 4;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  int jobs = 1;
};

ExperimentConfig load(const Common& c) { return load_config(c.config, c.sets); }

fs::path prepare_output(const ExperimentConfig& cfg) {
  const fs::path dir = cfg.output_path();
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return git_blob_sha1(buf.str());
}

json config_json(const ExperimentConfig& cfg) {
  json j = json::object();
  for (const auto& [k, v] : config_echo(cfg)) j[k] = v;
  return j;
}

Ncbf load_checkpoint(const ExperimentConfig& cfg, const std::string& path) {
  return load_barrier(path, [&](const std::string& id) {
    if (id != cfg.scenario) {
      throw ConfigError("checkpoint is for '" + id + "' but the config scenario is '" +
                        cfg.scenario + "'");
    }
    return cfg.make_system();
  });
}

/// Runs fn(0..count-1) on up to `jobs` threads.
template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, count));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < jobs; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// --- train -----------------------------------------------------------------

bool train_one(const ExperimentConfig& cfg, std::ostream& log) {
  const fs::path dir = prepare_output(cfg);
  auto checkpoint_path = [&](int it) { return dir / ("checkpoint_" + std::to_string(it) + ".bin"); };
  const ExperimentRun run = run_experiment(cfg, &log, [&](int it, const Ncbf& b) {
    save_barrier(checkpoint_path(it).string(), b);
  });
  const auto& history = run.result.history;
  save_barrier((dir / "checkpoint.bin").string(), run.result.barrier);
  {
    std::ofstream out(dir / "history.csv");
    write_history_csv(out, history);
  }

  json m;
  m["command"] = "train";
  m["config"] = config_json(cfg);
  m["history_hash"] = history_hash(history);
  m["checkpoint_hash"] = file_hash(dir / "checkpoint.bin");
  m["iterations"] = history.size();
  m["eps_lb"] = run.trainer.eps_lb;
  m["eps_ub"] = run.trainer.eps_ub;
  bool warned = false;
  if (run.bounds) {
    m["pretrain"] = {{"vol_star", run.bounds->vol_star},
                     {"feas_at_star", run.bounds->feas_at_star},
                     {"iteration", run.bounds->iteration},
                     {"threshold_reached", run.bounds->threshold_reached}};
    warned = !run.bounds->threshold_reached;
  }
  if (!history.empty()) {
    double total_ms = 0.0;
    for (const auto& r : history) total_ms += r.wall_ms;
    m["final"] = {{"L_feas", history.back().feas},
                  {"L_vol", history.back().vol},
                  {"region", history.back().region}};
    m["mean_iteration_ms"] = total_ms / static_cast<double>(history.size());
  }
  m["files"] = {"checkpoint.bin", "history.csv"};
  write_json(dir / "manifest.json", m);
  log << "train: " << history.size() << " iterations -> " << dir.string() << "\n";
  return warned;
}

int cmd_train(const Common& c, const std::vector<std::uint64_t>& seeds) {
  const ExperimentConfig base = load(c);
  if (seeds.empty()) return train_one(base, std::cerr) ? kExitWarning : 0;

  std::vector<ExperimentConfig> runs;
  for (auto s : seeds) {
    ExperimentConfig cfg = base;
    cfg.trainer.seed = s;
    cfg.network.init_seed = s;
    cfg.output_dir = (fs::path(base.output_dir) / ("seed_" + std::to_string(s))).string();
    runs.push_back(cfg);
  }
  std::vector<char> warned(runs.size(), 0);
  std::mutex log_mutex;
  parallel_for(static_cast<int>(runs.size()), c.jobs, [&](int i) {
    std::ostringstream log;
    warned[i] = train_one(runs[i], log);
    std::lock_guard lock(log_mutex);
    std::cerr << log.str();
  });
  for (char w : warned)
    if (w) return kExitWarning;
  return 0;
}

// --- kernel / compare ------------------------------------------------------

ValueGrid kernel_from_config(const ExperimentConfig& cfg) {
  const auto sys = cfg.make_system();
  if (sys->state_dim() != 2) throw ConfigError("kernel: scenario '" + cfg.scenario + "' is not 2-D");
  return compute_kernel(*sys, cfg.grid_spec(*sys), cfg.kernel.tol, cfg.kernel.max_sweeps);
}

ValueGrid read_kernel_csv(const ExperimentConfig& cfg, const std::string& path) {
  const auto sys = cfg.make_system();
  if (sys->state_dim() != 2) throw ConfigError("kernel: scenario '" + cfg.scenario + "' is not 2-D");
  ValueGrid grid(cfg.grid_spec(*sys));
  grid.initialize(*sys);
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open kernel " + path);
  std::string line;
  std::getline(in, line);
  if (line != "x0,x1,V") throw ConfigError(path + ": not a kernel CSV");
  long count = 0;
  const long expected = static_cast<long>(grid.nx()) * grid.ny();
  while (std::getline(in, line) && count < expected) {
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ConfigError(path + ": malformed row");
    grid.values()(count / grid.ny(), count % grid.ny()) = std::stod(line.substr(comma + 1));
    ++count;
  }
  if (count != expected) throw ConfigError(path + ": node count does not match the kernel grid");
  grid.converged = true;
  return grid;
}

int cmd_kernel(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const ValueGrid grid = kernel_from_config(cfg);
  const fs::path dir = prepare_output(cfg);
  {
    std::ofstream out(dir / "kernel.csv");
    write_kernel_csv(out, grid);
  }
  {
    std::ofstream out(dir / "kernel_contour.csv");
    write_contour_csv(out, zero_contour(grid));
  }
  json m;
  m["command"] = "kernel";
  m["config"] = config_json(cfg);
  m["converged"] = grid.converged;
  m["sweeps"] = grid.sweeps;
  m["last_change"] = grid.last_change;
  m["node_area"] = kernel_node_area(grid);
  m["kernel_hash"] = file_hash(dir / "kernel.csv");
  write_json(dir / "kernel.json", m);
  std::cerr << "kernel: " << grid.sweeps << " sweeps, converged=" << grid.converged
            << ", area " << kernel_node_area(grid) << "\n";
  return grid.converged ? 0 : kExitWarning;
}

int cmd_compare(const Common& c, const std::string& checkpoint, const std::string& kernel) {
  const ExperimentConfig cfg = load(c);
  const Ncbf barrier = load_checkpoint(cfg, checkpoint);
  const ValueGrid grid = kernel.empty() ? kernel_from_config(cfg) : read_kernel_csv(cfg, kernel);
  const SetComparison s = compare_sets(barrier, grid, cfg.compare.samples, cfg.compare.seed);
  json m;
  m["command"] = "compare";
  m["checkpoint"] = checkpoint;
  m["coverage"] = s.coverage_defined ? json(s.coverage) : json(nullptr);
  m["conservatism"] = s.conservatism_defined ? json(s.conservatism) : json(nullptr);
  m["coverage_defined"] = s.coverage_defined;
  m["conservatism_defined"] = s.conservatism_defined;
  m["area_learned"] = s.area_learned;
  m["area_kernel"] = s.area_kernel;
  m["area_both"] = s.area_both;
  m["area_box"] = s.area_box;
  m["samples"] = s.n_samples;
  m["kernel_converged"] = grid.converged;
  const fs::path dir = prepare_output(cfg);
  write_json(dir / "metrics.json", m);
  std::cout << m.dump(2) << "\n";
  if (!s.coverage_defined) std::cerr << "warning: learned set has no samples; coverage undefined\n";
  return grid.converged && s.coverage_defined ? 0 : kExitWarning;
}

// --- volume / slice --------------------------------------------------------

json volume_json(const VolumeEstimate& v) {
  return {{"volume", v.volume}, {"std_error", v.std_error}, {"fraction", v.fraction},
          {"hits", v.hits}, {"samples", v.samples}};
}

int cmd_volume(const Common& c, const std::string& checkpoint, const std::string& baseline) {
  const ExperimentConfig cfg = load(c);
  const Ncbf barrier = load_checkpoint(cfg, checkpoint);
  const VolumeEstimate v = monte_carlo_volume(barrier, cfg.volume.samples, cfg.volume.seed);
  json m;
  m["command"] = "volume";
  m["checkpoint"] = checkpoint;
  m["estimate"] = volume_json(v);
  if (!baseline.empty()) {
    const Ncbf base = load_checkpoint(cfg, baseline);
    const VolumeEstimate vb = monte_carlo_volume(base, cfg.volume.samples, cfg.volume.seed);
    m["baseline"] = baseline;
    m["baseline_estimate"] = volume_json(vb);
    m["ratio_baseline_over_checkpoint"] = v.volume > 0.0 ? json(vb.volume / v.volume) : json(nullptr);
  }
  write_json(prepare_output(cfg) / "volume.json", m);
  std::cout << m.dump(2) << "\n";
  return 0;
}

int cmd_slice(const Common& c, const std::string& checkpoint) {
  const ExperimentConfig cfg = load(c);
  const Ncbf barrier = load_checkpoint(cfg, checkpoint);
  SliceSpec spec;
  spec.dims = {cfg.slice.dims[0], cfg.slice.dims[1]};
  spec.resolution = cfg.slice.resolution;
  if (!cfg.slice.fixed.empty()) {
    spec.fixed = Eigen::Map<const Vec>(cfg.slice.fixed.data(),
                                       static_cast<Eigen::Index>(cfg.slice.fixed.size()));
  }
  const SliceGrid grid = slice_values(barrier, spec);
  const fs::path path = prepare_output(cfg) / ("slice_x" + std::to_string(spec.dims[0]) + "_x" +
                                               std::to_string(spec.dims[1]) + ".csv");
  std::ofstream out(path);
  write_slice_csv(out, grid);
  std::cerr << "slice: " << path.string() << "\n";
  return 0;
}

// --- simulate --------------------------------------------------------------

json trajectory_summary(const Trajectory& tr) {
  json s;
  s["steps"] = tr.steps();
  s["min_h"] = tr.min_h;
  s["min_h_theta"] = std::isfinite(tr.min_h_theta) ? json(tr.min_h_theta) : json(nullptr);
  s["filter_active_steps"] = tr.active_steps;
  s["infeasible_steps"] = tr.infeasible_steps;
  s["aborted"] = tr.aborted;
  if (tr.aborted) s["abort_reason"] = tr.abort_reason;
  s["final_state"] = std::vector<double>(tr.states.col(tr.states.cols() - 1).data(),
                                         tr.states.col(tr.states.cols() - 1).data() +
                                             tr.states.rows());
  return s;
}

int cmd_simulate(const Common& c, const std::string& checkpoint, int runs, std::uint64_t seed) {
  const ExperimentConfig cfg = load(c);
  const auto sys = cfg.make_system();
  std::optional<Ncbf> barrier;
  if (!checkpoint.empty() && cfg.simulate.filter) barrier = load_checkpoint(cfg, checkpoint);
  const NominalPolicy policy = cfg.nominal_policy(*sys);
  const int n = sys->state_dim();

  std::vector<Vec> starts;
  if (runs <= 1) {
    starts.push_back(cfg.simulate.x0.empty()
                         ? cfg.anchor_state(n)
                         : Vec(Eigen::Map<const Vec>(cfg.simulate.x0.data(),
                                                     static_cast<Eigen::Index>(cfg.simulate.x0.size()))));
    require_dim(starts.back().size(), n, "simulate.x0");
  } else {
    // Uniform starts, restricted to the learned set when one is loaded.
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Box& box = sys->state_box;
    for (long tries = 0; static_cast<int>(starts.size()) < runs; ++tries) {
      if (tries > 1000L * runs) throw NumericalError("simulate: learned set too small to draw starts");
      Vec x(n);
      for (int i = 0; i < n; ++i) x(i) = box.lo(i) + unit(rng) * (box.hi(i) - box.lo(i));
      if (!barrier || barrier->value(x) >= 0.0) starts.push_back(x);
    }
  }

  std::vector<Trajectory> trajs(starts.size());
  parallel_for(static_cast<int>(starts.size()), c.jobs, [&](int i) {
    trajs[i] = simulate(*sys, barrier ? &*barrier : nullptr, policy, starts[i],
                        cfg.simulate.duration, cfg.simulate.dt);
  });

  const fs::path dir = prepare_output(cfg);
  json m;
  m["command"] = "simulate";
  m["config"] = config_json(cfg);
  m["filtered"] = barrier.has_value();
  if (barrier) m["checkpoint"] = checkpoint;
  json list = json::array();
  double worst_h = std::numeric_limits<double>::infinity();
  bool aborted = false;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const std::string name =
        trajs.size() == 1 ? "trajectory.csv" : "trajectory_" + std::to_string(i) + ".csv";
    std::ofstream out(dir / name);
    write_trajectory_csv(out, trajs[i]);
    json s = trajectory_summary(trajs[i]);
    s["file"] = name;
    list.push_back(s);
    worst_h = std::min(worst_h, trajs[i].min_h);
    aborted = aborted || trajs[i].aborted;
  }
  m["runs"] = list;
  m["min_h"] = worst_h;
  write_json(dir / "summary.json", m);
  std::cerr << "simulate: " << trajs.size() << " run(s), min h = " << worst_h << "\n";
  return aborted ? kExitNumerical : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pareto-trained neural control barrier functions"};
  app.require_subcommand(1);
  Common common;
  std::vector<std::uint64_t> seeds;
  std::string checkpoint, kernel, baseline;
  int runs = 1;
  std::uint64_t start_seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Configuration file (.ini or .json)");
    sub->add_option("--set", common.sets, "Override a key: section.key=value")->take_all();
    sub->add_option("--jobs", common.jobs, "Worker threads for independent runs")
        ->check(CLI::PositiveNumber);
  };
  auto* train = app.add_subcommand("train", "Train a barrier (PCBF or LCCBF)");
  add_common(train);
  train->add_option("--seeds", seeds, "Train one run per seed, each in seed_<s>/")->delimiter(',');
  auto* kern = app.add_subcommand("kernel", "Grid viability kernel of a 2-D scenario");
  add_common(kern);
  auto* compare = app.add_subcommand("compare", "Learned set against the viability kernel");
  add_common(compare);
  compare->add_option("--checkpoint", checkpoint)->required();
  compare->add_option("--kernel", kernel, "Kernel CSV from `pcbf kernel` (else recomputed)");
  auto* volume = app.add_subcommand("volume", "Monte-Carlo volume of the learned set");
  add_common(volume);
  volume->add_option("--checkpoint", checkpoint)->required();
  volume->add_option("--baseline", baseline, "Second checkpoint; reports its volume ratio");
  auto* slice = app.add_subcommand("slice", "h_theta over a 2-D slice of the state box");
  add_common(slice);
  slice->add_option("--checkpoint", checkpoint)->required();
  auto* sim = app.add_subcommand("simulate", "Closed-loop simulation, filtered when a checkpoint is given");
  add_common(sim);
  sim->add_option("--checkpoint", checkpoint);
  sim->add_option("--runs", runs, "Number of random starts (default: the configured x0)");
  sim->add_option("--start-seed", start_seed, "Seed for random starts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(common, seeds);
    if (*kern) return cmd_kernel(common);
    if (*compare) return cmd_compare(common, checkpoint, kernel);
    if (*volume) return cmd_volume(common, checkpoint, baseline);
    if (*slice) return cmd_slice(common, checkpoint);
    if (*sim) return cmd_simulate(common, checkpoint, runs, start_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
