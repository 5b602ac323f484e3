#pragma once

// Experiment configuration. The text format is INI-like:
//
//   scenario = pendulum        # top-level keys before any section
//   [trainer]
//   eta = 0.1
//   [network]
//   hidden = 64, 64, 64
//
// Keys are addressed as "section.key" (e.g. trainer.eta), which is also the
// syntax of --set overrides. A JSON object of objects is accepted instead.
// Unknown keys are rejected.

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pcbf/common.hpp"
#include "pcbf/hjgrid.hpp"
#include "pcbf/nominal.hpp"
#include "pcbf/systems.hpp"
#include "pcbf/trainer.hpp"

namespace pcbf {

using ConfigMap = std::map<std::string, std::string>;

struct NetworkConfig {
  std::vector<int> hidden{64, 64, 64};
  std::uint64_t init_seed = 1;
};

struct KernelConfig {
  int nx = 201;
  int ny = 201;
  double dt = 0.02;
  double tol = 1e-6;
  int max_sweeps = 10000;
};

struct SampleConfig {
  std::int64_t samples = 100000;
  std::uint64_t seed = 11;
};

struct SliceConfig {
  std::vector<int> dims{0, 1};
  std::vector<double> fixed;  // empty = all zeros
  int resolution = 101;
};

struct SimulationConfig {
  std::string policy = "pd";  // pd | adversarial
  double duration = 10.0;
  double dt = 1.0 / 300.0;
  std::vector<double> x0;     // empty = anchor state
  std::vector<double> waypoint{0.0, 0.0, 0.0};
  std::vector<double> adversarial_u;  // empty = upper input-box corner
  double pd_kp = 3.0;
  double pd_kd = 2.0;
  bool filter = true;
};

struct ExperimentConfig {
  std::string scenario = "pendulum";
  std::vector<double> anchor;  // empty = origin
  bool auto_bounds = true;     // estimate eps bounds by LCCBF pre-training
  NetworkConfig network;
  TrainerConfig trainer;
  PendulumParams pendulum;
  QuadrotorParams quadrotor;
  KernelConfig kernel;
  SampleConfig compare{50000, 3};
  SampleConfig volume{1000000, 5};
  SliceConfig slice;
  SimulationConfig simulate;
  std::string output_dir = "runs";

  std::shared_ptr<const ControlAffineSystem> make_system() const {
    if (scenario == "pendulum") return std::make_shared<const ControlAffineSystem>(make_pendulum(pendulum));
    if (scenario == "quadrotor") return std::make_shared<const ControlAffineSystem>(make_quadrotor(quadrotor));
    throw ConfigError("unknown scenario '" + scenario + "'");
  }

  Vec anchor_state(int dim) const {
    if (anchor.empty()) return Vec::Zero(dim);
    if (static_cast<int>(anchor.size()) != dim) {
      throw ConfigError("anchor has " + std::to_string(anchor.size()) + " entries, scenario needs " +
                        std::to_string(dim));
    }
    return Eigen::Map<const Vec>(anchor.data(), dim);
  }

  std::vector<int> layer_sizes(int input_dim) const {
    std::vector<int> sizes{input_dim};
    sizes.insert(sizes.end(), network.hidden.begin(), network.hidden.end());
    sizes.push_back(1);
    return sizes;
  }

  GridSpec grid_spec(const ControlAffineSystem& sys) const {
    return {sys.state_box, kernel.nx, kernel.ny, kernel.dt};
  }

  /// The configured nominal policy for the given system.
  NominalPolicy nominal_policy(const ControlAffineSystem& sys) const {
    if (simulate.policy == "adversarial") {
      if (simulate.adversarial_u.empty()) return ConstantInput{sys.input_box.hi};
      if (static_cast<int>(simulate.adversarial_u.size()) != sys.input_dim()) {
        throw ConfigError("simulate.adversarial_u has the wrong length");
      }
      return ConstantInput{Eigen::Map<const Vec>(simulate.adversarial_u.data(), sys.input_dim())};
    }
    if (simulate.policy != "pd") throw ConfigError("simulate.policy must be pd or adversarial");
    if (scenario == "pendulum") return PendulumPd{simulate.pd_kp, simulate.pd_kd};
    if (simulate.waypoint.size() != 3) throw ConfigError("simulate.waypoint needs 3 entries");
    return quadrotor_pd_for(quadrotor, Eigen::Vector3d(simulate.waypoint[0], simulate.waypoint[1],
                                                       simulate.waypoint[2]));
  }

  /// Output directory, prefixed by $PCBF_OUTPUT_ROOT when it is relative.
  std::filesystem::path output_path() const {
    std::filesystem::path p(output_dir);
    if (p.is_relative()) {
      if (const char* root = std::getenv("PCBF_OUTPUT_ROOT"); root && *root) {
        return std::filesystem::path(root) / p;
      }
    }
    return p;
  }

  void validate() const {
    if (scenario != "pendulum" && scenario != "quadrotor") {
      throw ConfigError("scenario must be pendulum or quadrotor");
    }
    if (network.hidden.empty()) throw ConfigError("network.hidden needs at least one layer");
    for (int w : network.hidden) {
      if (w <= 0) throw ConfigError("network.hidden widths must be positive");
    }
    trainer.validate();
    if (kernel.nx < 2 || kernel.ny < 2) throw ConfigError("kernel grid needs >= 2 nodes per axis");
    if (!(kernel.dt > 0.0)) throw ConfigError("kernel.dt must be positive");
    if (!(kernel.tol >= 0.0)) throw ConfigError("kernel.tol must be >= 0");
    if (kernel.max_sweeps < 1) throw ConfigError("kernel.max_sweeps must be >= 1");
    if (compare.samples < 1 || volume.samples < 1) throw ConfigError("sample counts must be >= 1");
    if (slice.dims.size() != 2) throw ConfigError("slice.dims needs two entries");
    if (slice.resolution < 1) throw ConfigError("slice.resolution must be >= 1");
    if (!(simulate.dt > 0.0)) throw ConfigError("simulate.dt must be positive");
    if (!(simulate.duration >= 0.0)) throw ConfigError("simulate.duration must be >= 0");
  }
};

namespace cfg_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    if constexpr (std::is_floating_point_v<T>) {
      if (text == "inf" || text == "infinity") return std::numeric_limits<T>::infinity();
    }
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + text + "'");
}

template <typename T>
std::string format(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_floating_point_v<T>) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  } else {
    return std::to_string(v);
  }
}

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

template <typename T>
Field scalar(const std::string& key, T& ref) {
  return {[key, &ref](const std::string& text) {
            if constexpr (std::is_same_v<T, bool>) {
              ref = parse_bool(key, text);
            } else if constexpr (std::is_same_v<T, std::string>) {
              ref = text;
            } else {
              ref = parse_number<T>(key, text);
            }
          },
          [&ref] { return format(ref); }};
}

template <typename T>
Field list(const std::string& key, std::vector<T>& ref) {
  return {[key, &ref](const std::string& text) {
            std::vector<T> out;
            for (const auto& item : split_list(text)) out.push_back(parse_number<T>(key, item));
            ref = std::move(out);
          },
          [&ref] {
            std::string s;
            for (std::size_t i = 0; i < ref.size(); ++i) s += (i ? ", " : "") + format(ref[i]);
            return s;
          }};
}

inline Field vector3(const std::string& key, Eigen::Vector3d& ref) {
  return {[key, &ref](const std::string& text) {
            const auto items = split_list(text);
            if (items.size() != 3) throw ConfigError(key + " needs 3 entries");
            for (int i = 0; i < 3; ++i) ref(i) = parse_number<double>(key, items[i]);
          },
          [&ref] { return format(ref(0)) + ", " + format(ref(1)) + ", " + format(ref(2)); }};
}

inline Field mode_field(TrainMode& ref) {
  return {[&ref](const std::string& text) {
            if (text == "pcbf") ref = TrainMode::Pcbf;
            else if (text == "lccbf") ref = TrainMode::Lccbf;
            else throw ConfigError("trainer.mode must be pcbf or lccbf");
          },
          [&ref] { return std::string(ref == TrainMode::Pcbf ? "pcbf" : "lccbf"); }};
}

}  // namespace cfg_detail

/// Every recognised key bound to its slot in `c`.
inline std::map<std::string, cfg_detail::Field> config_fields(ExperimentConfig& c) {
  using namespace cfg_detail;
  std::map<std::string, Field> f;
  auto add = [&f](const std::string& key, auto&& make) { f.emplace(key, make(key)); };
  auto s = [](auto& ref) { return [&ref](const std::string& k) { return scalar(k, ref); }; };
  auto l = [](auto& ref) { return [&ref](const std::string& k) { return list(k, ref); }; };

  add("scenario", s(c.scenario));
  add("anchor", l(c.anchor));
  add("auto_bounds", s(c.auto_bounds));
  add("output.dir", s(c.output_dir));

  add("network.hidden", l(c.network.hidden));
  add("network.init_seed", s(c.network.init_seed));

  TrainerConfig& t = c.trainer;
  f.emplace("trainer.mode", mode_field(t.mode));
  add("trainer.eta", s(t.eta));
  add("trainer.iterations", s(t.iterations));
  add("trainer.beta", s(t.beta));
  add("trainer.eps_lb", s(t.eps_lb));
  add("trainer.eps_ub", s(t.eps_ub));
  add("trainer.gamma", s(t.gamma));
  add("trainer.alpha_slope", s(t.alpha_slope));
  add("trainer.k", s(t.k));
  add("trainer.batch_size", s(t.batch_size));
  add("trainer.seed", s(t.seed));
  add("trainer.lambda_feas", s(t.lambda_feas));
  add("trainer.lambda_vol", s(t.lambda_vol));
  add("trainer.pretrain_iterations", s(t.pretrain_iterations));
  add("trainer.pretrain_threshold", s(t.pretrain_threshold));
  add("trainer.checkpoint_every", s(t.checkpoint_every));
  add("trainer.fixed_dataset", s(t.fixed_dataset));

  add("pendulum.safe_angle", s(c.pendulum.safe_angle));
  add("pendulum.u_max", s(c.pendulum.u_max));
  add("pendulum.angle_limit", s(c.pendulum.angle_limit));
  add("pendulum.rate_limit", s(c.pendulum.rate_limit));

  QuadrotorParams& q = c.quadrotor;
  add("quadrotor.mass", s(q.mass));
  f.emplace("quadrotor.inertia", vector3("quadrotor.inertia", q.inertia));
  add("quadrotor.gravity", s(q.gravity));
  add("quadrotor.max_torque", s(q.max_torque));
  add("quadrotor.rho", s(q.rho));
  add("quadrotor.obstacle_x_lo", s(q.obstacle_x_lo));
  add("quadrotor.obstacle_x_hi", s(q.obstacle_x_hi));
  add("quadrotor.obstacle_y_lo", s(q.obstacle_y_lo));
  add("quadrotor.obstacle_y_hi", s(q.obstacle_y_hi));

  add("kernel.nx", s(c.kernel.nx));
  add("kernel.ny", s(c.kernel.ny));
  add("kernel.dt", s(c.kernel.dt));
  add("kernel.tol", s(c.kernel.tol));
  add("kernel.max_sweeps", s(c.kernel.max_sweeps));

  add("compare.samples", s(c.compare.samples));
  add("compare.seed", s(c.compare.seed));
  add("volume.samples", s(c.volume.samples));
  add("volume.seed", s(c.volume.seed));

  add("slice.dims", l(c.slice.dims));
  add("slice.fixed", l(c.slice.fixed));
  add("slice.resolution", s(c.slice.resolution));

  SimulationConfig& sim = c.simulate;
  add("simulate.policy", s(sim.policy));
  add("simulate.duration", s(sim.duration));
  add("simulate.dt", s(sim.dt));
  add("simulate.x0", l(sim.x0));
  add("simulate.waypoint", l(sim.waypoint));
  add("simulate.adversarial_u", l(sim.adversarial_u));
  add("simulate.pd_kp", s(sim.pd_kp));
  add("simulate.pd_kd", s(sim.pd_kd));
  add("simulate.filter", s(sim.filter));
  return f;
}

/// Parses the INI-like text format into dotted keys.
inline ConfigMap parse_ini(std::istream& in) {
  ConfigMap out;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find_first_of("#;"); hash != std::string::npos) line.erase(hash);
    line = cfg_detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section");
      section = cfg_detail::trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = cfg_detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = cfg_detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

/// JSON alternative: nested objects become dotted keys, arrays become
/// comma-separated lists.
inline ConfigMap parse_json_config(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad JSON config: ") + e.what());
  }
  ConfigMap out;
  std::function<void(const nlohmann::json&, const std::string&)> walk =
      [&](const nlohmann::json& node, const std::string& prefix) {
        if (node.is_object()) {
          for (const auto& [k, v] : node.items()) walk(v, prefix.empty() ? k : prefix + "." + k);
          return;
        }
        auto scalar = [&](const nlohmann::json& v) -> std::string {
          if (v.is_string()) return v.get<std::string>();
          if (v.is_number() || v.is_boolean()) return v.dump();
          throw ConfigError("unsupported JSON value at " + prefix);
        };
        if (node.is_array()) {
          std::string s;
          for (std::size_t i = 0; i < node.size(); ++i) s += (i ? "," : "") + scalar(node[i]);
          out[prefix] = s;
        } else {
          out[prefix] = scalar(node);
        }
      };
  if (!doc.is_object()) throw ConfigError("JSON config must be an object");
  walk(doc, "");
  return out;
}

inline void apply_config(ExperimentConfig& c, const ConfigMap& values) {
  auto fields = config_fields(c);
  for (const auto& [key, value] : values) {
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(value);
  }
}

/// Applies "key=value" overrides.
inline void apply_overrides(ExperimentConfig& c, const std::vector<std::string>& sets) {
  ConfigMap values;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + s + "' is not key=value");
    values[cfg_detail::trim(std::string_view(s).substr(0, eq))] =
        cfg_detail::trim(std::string_view(s).substr(eq + 1));
  }
  apply_config(c, values);
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::string>& overrides = {}) {
  ExperimentConfig c;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    const bool json = std::filesystem::path(path).extension() == ".json";
    apply_config(c, json ? parse_json_config(in) : parse_ini(in));
  }
  apply_overrides(c, overrides);
  c.validate();
  return c;
}

/// Flat key/value echo of the full configuration (manifest content).
inline ConfigMap config_echo(const ExperimentConfig& c) {
  ExperimentConfig copy = c;
  ConfigMap out;
  for (const auto& [key, field] : config_fields(copy)) out[key] = field.get();
  return out;
}

}  // namespace pcbf
