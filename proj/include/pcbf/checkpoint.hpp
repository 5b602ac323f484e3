#pragma once

// Binary checkpoints. All integers are uint32 and all reals are IEEE-754
// binary64, both little-endian.
//
//   network:  "PCBF1" | L | layer_sizes[L] | theta[p]
//   barrier:  network | len | scenario id bytes[len] | n | anchor[n] | c
//
// theta is laid out layer by layer, each layer its column-major weight
// matrix (fan_out x fan_in) followed by its bias vector.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "pcbf/barrier.hpp"
#include "pcbf/mlp.hpp"

namespace pcbf {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

inline constexpr char kMagic[5] = {'P', 'C', 'B', 'F', '1'};

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b, 4);
}

inline void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(b, 8);
}

inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw CheckpointError("checkpoint truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace io

inline void write_params(std::ostream& out, const MlpParams& params) {
  out.write(io::kMagic, sizeof io::kMagic);
  const auto& sizes = params.layer_sizes();
  io::put_u32(out, static_cast<std::uint32_t>(sizes.size()));
  for (int s : sizes) io::put_u32(out, static_cast<std::uint32_t>(s));
  for (Eigen::Index i = 0; i < params.size(); ++i) io::put_f64(out, params.flat()(i));
}

inline MlpParams read_params(std::istream& in) {
  char magic[sizeof io::kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, io::kMagic, sizeof magic) != 0) {
    throw CheckpointError("not a PCBF1 checkpoint");
  }
  const std::uint32_t count = io::get_u32(in);
  if (count < 2 || count > 64) throw CheckpointError("implausible layer count");
  std::vector<int> sizes(count);
  for (auto& s : sizes) {
    const std::uint32_t v = io::get_u32(in);
    if (v == 0 || v > (1u << 20)) throw CheckpointError("implausible layer size");
    s = static_cast<int>(v);
  }
  try {
    MlpParams::validate_sizes(sizes);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(e.what());
  }
  Vec theta(parameter_count(sizes));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = io::get_f64(in);
  return MlpParams::from_flat(sizes, theta);
}

inline void write_barrier(std::ostream& out, const Ncbf& barrier) {
  write_params(out, barrier.network());
  const std::string& id = barrier.system().id;
  io::put_u32(out, static_cast<std::uint32_t>(id.size()));
  out.write(id.data(), static_cast<std::streamsize>(id.size()));
  io::put_u32(out, static_cast<std::uint32_t>(barrier.anchor().size()));
  for (Eigen::Index i = 0; i < barrier.anchor().size(); ++i) io::put_f64(out, barrier.anchor()(i));
  io::put_f64(out, barrier.alpha_slope());
}

/// Builds the system named by a checkpoint's scenario id.
using SystemFactory =
    std::function<std::shared_ptr<const ControlAffineSystem>(const std::string& id)>;

inline std::shared_ptr<const ControlAffineSystem> default_system(const std::string& id) {
  if (id == "pendulum") return std::make_shared<const ControlAffineSystem>(make_pendulum());
  if (id == "quadrotor") return std::make_shared<const ControlAffineSystem>(make_quadrotor());
  throw CheckpointError("unknown scenario id '" + id + "'");
}

inline Ncbf read_barrier(std::istream& in, const SystemFactory& factory = default_system) {
  MlpParams params = read_params(in);
  const std::uint32_t len = io::get_u32(in);
  if (len > 4096) throw CheckpointError("implausible scenario id length");
  std::string id(len, '\0');
  if (!in.read(id.data(), len)) throw CheckpointError("checkpoint truncated");
  const std::uint32_t n = io::get_u32(in);
  if (n != static_cast<std::uint32_t>(params.input_dim())) {
    throw CheckpointError("anchor dimension does not match the network input");
  }
  Vec anchor(n);
  for (std::uint32_t i = 0; i < n; ++i) anchor(i) = io::get_f64(in);
  const double c = io::get_f64(in);
  auto sys = factory(id);
  if (!sys || sys->id != id) throw CheckpointError("factory returned the wrong scenario");
  try {
    return Ncbf(std::move(params), std::move(anchor), std::move(sys), c);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(e.what());
  }
}

inline void save_barrier(const std::string& path, const Ncbf& barrier) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  write_barrier(out, barrier);
  if (!out) throw CheckpointError("write to " + path + " failed");
}

inline Ncbf load_barrier(const std::string& path, const SystemFactory& factory = default_system) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  return read_barrier(in, factory);
}

}  // namespace pcbf
