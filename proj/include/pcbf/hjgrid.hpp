#pragma once

// Infinite-horizon viability kernel of a planar control-affine system by
// discrete-time dynamic programming on a regular grid:
//   V_{k+1}(x) = min(h(x), max_{u in V(U)} V_k(x + dt (f(x) + g(x) u)))
// with bilinear interpolation. The kernel is {V >= 0}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "pcbf/barrier.hpp"
#include "pcbf/systems.hpp"

namespace pcbf {

struct GridSpec {
  Box extent;
  int nx = 201;
  int ny = 201;
  double dt = 0.02;

  void validate() const {
    if (extent.dim() != 2) throw std::invalid_argument("GridSpec: extent must be 2-D");
    if (nx < 2 || ny < 2) throw std::invalid_argument("GridSpec: need at least 2 nodes per axis");
    if (!(dt > 0.0)) throw std::invalid_argument("GridSpec: dt must be positive");
    if (!((extent.hi - extent.lo).array() > 0.0).all()) {
      throw std::invalid_argument("GridSpec: degenerate extent");
    }
  }
};

/// Node values on a regular nx x ny grid; V(i, j) sits at
/// (lo_0 + i dx, lo_1 + j dy).
class ValueGrid {
 public:
  ValueGrid() = default;
  explicit ValueGrid(GridSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    values_ = Mat::Zero(spec_.nx, spec_.ny);
    margin_ = Mat::Zero(spec_.nx, spec_.ny);
  }

  const GridSpec& spec() const { return spec_; }
  int nx() const { return spec_.nx; }
  int ny() const { return spec_.ny; }
  double dx() const { return (spec_.extent.hi(0) - spec_.extent.lo(0)) / (spec_.nx - 1); }
  double dy() const { return (spec_.extent.hi(1) - spec_.extent.lo(1)) / (spec_.ny - 1); }

  Eigen::Vector2d node(int i, int j) const {
    return {spec_.extent.lo(0) + i * dx(), spec_.extent.lo(1) + j * dy()};
  }

  const Mat& values() const { return values_; }
  Mat& values() { return values_; }
  /// h at the nodes.
  const Mat& margin() const { return margin_; }
  /// Value used for successors that leave the grid: strictly below every
  /// node value the iteration can produce.
  double outside_value() const { return outside_; }

  /// V_0 = h at every node.
  void initialize(const ControlAffineSystem& sys) {
    require_dim(sys.state_dim(), 2, "ValueGrid::initialize");
    for (int i = 0; i < nx(); ++i) {
      for (int j = 0; j < ny(); ++j) {
        margin_(i, j) = sys.safe_margin(Vec(node(i, j))).value;
      }
    }
    values_ = margin_;
    outside_ = margin_.minCoeff() - 1.0;
    sweeps = 0;
    converged = false;
    last_change = std::numeric_limits<double>::infinity();
  }

  bool in_extent(const Eigen::Ref<const Vec>& x) const {
    return x.size() == 2 && spec_.extent.contains(x);
  }

  /// Bilinear interpolation of V; x must lie within the extent.
  double interpolate(const Eigen::Ref<const Vec>& x) const {
    if (!in_extent(x)) throw std::out_of_range("ValueGrid::interpolate: outside grid extent");
    int i0 = 0, j0 = 0;
    double tx = 0.0, ty = 0.0;
    locate(x(0), x(1), i0, j0, tx, ty);
    return blend(i0, j0, tx, ty);
  }

  /// Cell index and fractional offsets of an in-extent point.
  void locate(double x0, double x1, int& i0, int& j0, double& tx, double& ty) const {
    const double fx = (x0 - spec_.extent.lo(0)) / dx();
    const double fy = (x1 - spec_.extent.lo(1)) / dy();
    i0 = std::clamp(static_cast<int>(std::floor(fx)), 0, nx() - 2);
    j0 = std::clamp(static_cast<int>(std::floor(fy)), 0, ny() - 2);
    tx = fx - i0;
    ty = fy - j0;
  }

  double blend(int i0, int j0, double tx, double ty) const {
    return (1 - tx) * (1 - ty) * values_(i0, j0) + tx * (1 - ty) * values_(i0 + 1, j0) +
           (1 - tx) * ty * values_(i0, j0 + 1) + tx * ty * values_(i0 + 1, j0 + 1);
  }

  int sweeps = 0;
  bool converged = false;
  double last_change = std::numeric_limits<double>::infinity();

 private:
  GridSpec spec_;
  Mat values_;
  Mat margin_;
  double outside_ = -1.0;
};

/// Precomputed Euler successors of every node under every input vertex.
class SuccessorTable {
 public:
  SuccessorTable(const ValueGrid& grid, const ControlAffineSystem& sys) {
    require_dim(sys.state_dim(), 2, "SuccessorTable");
    const Mat verts = vertices(sys.input_box);
    vertex_count_ = static_cast<int>(verts.cols());
    entries_.resize(static_cast<std::size_t>(grid.nx()) * grid.ny() * vertex_count_);
    std::size_t idx = 0;
    for (int i = 0; i < grid.nx(); ++i) {
      for (int j = 0; j < grid.ny(); ++j) {
        const Vec x = grid.node(i, j);
        const Vec f = sys.drift(x);
        const Mat g = sys.actuation(x);
        for (int v = 0; v < vertex_count_; ++v, ++idx) {
          const Vec next = x + grid.spec().dt * (f + g * verts.col(v));
          Entry& e = entries_[idx];
          e.inside = grid.in_extent(next);
          if (e.inside) grid.locate(next(0), next(1), e.i0, e.j0, e.tx, e.ty);
        }
      }
    }
  }

  struct Entry {
    bool inside = false;
    int i0 = 0, j0 = 0;
    double tx = 0.0, ty = 0.0;
  };

  int vertex_count() const { return vertex_count_; }
  const Entry& at(std::size_t node, int vertex) const {
    return entries_[node * static_cast<std::size_t>(vertex_count_) +
                    static_cast<std::size_t>(vertex)];
  }

 private:
  int vertex_count_ = 0;
  std::vector<Entry> entries_;
};

/// One Jacobi sweep; returns the sup-norm change.
inline double viability_sweep(ValueGrid& grid, const SuccessorTable& table) {
  Mat next(grid.nx(), grid.ny());
  double change = 0.0;
  std::size_t node = 0;
  for (int i = 0; i < grid.nx(); ++i) {
    for (int j = 0; j < grid.ny(); ++j, ++node) {
      double best = -std::numeric_limits<double>::infinity();
      for (int v = 0; v < table.vertex_count(); ++v) {
        const auto& e = table.at(node, v);
        const double val =
            e.inside ? grid.blend(e.i0, e.j0, e.tx, e.ty) : grid.outside_value();
        best = std::max(best, val);
      }
      next(i, j) = std::min(grid.margin()(i, j), best);
      change = std::max(change, std::abs(next(i, j) - grid.values()(i, j)));
    }
  }
  grid.values() = std::move(next);
  ++grid.sweeps;
  grid.last_change = change;
  return change;
}

inline double viability_sweep(ValueGrid& grid, const ControlAffineSystem& sys) {
  return viability_sweep(grid, SuccessorTable(grid, sys));
}

/// Sweeps from V_0 = h until the sup-norm change is <= tol or max_sweeps is
/// hit (converged = false then).
inline ValueGrid compute_kernel(const ControlAffineSystem& sys, const GridSpec& spec,
                                double tol = 1e-6, int max_sweeps = 10000) {
  if (sys.state_dim() != 2) {
    throw std::invalid_argument("compute_kernel: only 2-D systems are supported");
  }
  if (max_sweeps < 1) throw std::invalid_argument("compute_kernel: max_sweeps must be >= 1");
  ValueGrid grid(spec);
  grid.initialize(sys);
  const SuccessorTable table(grid, sys);
  for (int k = 0; k < max_sweeps; ++k) {
    if (viability_sweep(grid, table) <= tol) {
      grid.converged = true;
      break;
    }
  }
  return grid;
}

inline bool kernel_membership(const ValueGrid& grid, const Eigen::Ref<const Vec>& x) {
  return grid.interpolate(x) >= 0.0;
}

struct SetComparison {
  double coverage = 0.0;      // P(kernel | learned)
  double conservatism = 0.0;  // P(learned | kernel)
  bool coverage_defined = false;
  bool conservatism_defined = false;
  double area_learned = 0.0;
  double area_kernel = 0.0;
  double area_both = 0.0;
  double area_box = 0.0;
  long n_samples = 0;
  long n_learned = 0;
  long n_kernel = 0;
  long n_both = 0;
};

/// Monte-Carlo comparison of two set-membership predicates over uniform
/// samples of `box`. `learned` and `kernel` map a batch (one state per
/// column) to membership flags.
template <typename LearnedFn, typename KernelFn>
SetComparison compare_membership(const Box& box, long n_samples, std::uint64_t seed,
                                 LearnedFn&& learned, KernelFn&& kernel) {
  if (n_samples < 1) throw std::invalid_argument("compare_sets: need at least one sample");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  SetComparison out;
  out.n_samples = n_samples;
  out.area_box = box.volume();
  const long chunk = 4096;
  for (long start = 0; start < n_samples; start += chunk) {
    const long count = std::min(chunk, n_samples - start);
    Mat batch(box.dim(), count);
    for (long c = 0; c < count; ++c) {
      for (int d = 0; d < box.dim(); ++d) {
        batch(d, c) = box.lo(d) + (box.hi(d) - box.lo(d)) * unit(rng);
      }
    }
    const std::vector<bool> in_l = learned(batch);
    const std::vector<bool> in_k = kernel(batch);
    for (long c = 0; c < count; ++c) {
      out.n_learned += in_l[c];
      out.n_kernel += in_k[c];
      out.n_both += in_l[c] && in_k[c];
    }
  }
  out.coverage_defined = out.n_learned > 0;
  out.conservatism_defined = out.n_kernel > 0;
  if (out.coverage_defined) out.coverage = double(out.n_both) / out.n_learned;
  if (out.conservatism_defined) out.conservatism = double(out.n_both) / out.n_kernel;
  const double n = static_cast<double>(n_samples);
  out.area_learned = out.area_box * out.n_learned / n;
  out.area_kernel = out.area_box * out.n_kernel / n;
  out.area_both = out.area_box * out.n_both / n;
  return out;
}

/// Learned set {h_theta >= 0} against the kernel {V >= 0} over the grid
/// extent.
inline SetComparison compare_sets(const Ncbf& barrier, const ValueGrid& grid,
                                  long n_samples, std::uint64_t seed) {
  require_dim(barrier.system().state_dim(), 2, "compare_sets");
  return compare_membership(
      grid.spec().extent, n_samples, seed,
      [&](const Mat& batch) {
        const RowVec v = barrier.values(batch);
        std::vector<bool> out(static_cast<std::size_t>(batch.cols()));
        for (Eigen::Index c = 0; c < batch.cols(); ++c) out[c] = v(c) >= 0.0;
        return out;
      },
      [&](const Mat& batch) {
        std::vector<bool> out(static_cast<std::size_t>(batch.cols()));
        for (Eigen::Index c = 0; c < batch.cols(); ++c) {
          out[c] = kernel_membership(grid, batch.col(c));
        }
        return out;
      });
}

/// Area of {V >= 0} counted by nodes (node count times cell area).
inline double kernel_node_area(const ValueGrid& grid) {
  return (grid.values().array() >= 0.0).count() * grid.dx() * grid.dy();
}

/// CSV of node coordinates and values: x0,x1,V.
inline void write_kernel_csv(std::ostream& out, const ValueGrid& grid) {
  out << "x0,x1,V\n";
  out.precision(17);
  for (int i = 0; i < grid.nx(); ++i) {
    for (int j = 0; j < grid.ny(); ++j) {
      const auto p = grid.node(i, j);
      out << p(0) << ',' << p(1) << ',' << grid.values()(i, j) << '\n';
    }
  }
}

/// Zero level set of a node-valued field as ordered polylines (marching
/// squares with segments chained through shared grid edges).
inline std::vector<std::vector<Eigen::Vector2d>> zero_contour(const ValueGrid& grid) {
  const Mat& v = grid.values();
  const int nx = grid.nx(), ny = grid.ny();
  // Edge ids: horizontal edge (i,j)-(i+1,j) -> 2 (i ny + j);
  //           vertical edge   (i,j)-(i,j+1) -> 2 (i ny + j) + 1.
  auto h_edge = [ny](int i, int j) { return 2L * (long(i) * ny + j); };
  auto v_edge = [ny](int i, int j) { return 2L * (long(i) * ny + j) + 1; };
  std::map<long, Eigen::Vector2d> points;
  auto crossing = [&](long id, int i0, int j0, int i1, int j1) {
    if (points.count(id) == 0) {
      const double a = v(i0, j0), b = v(i1, j1);
      const double t = a / (a - b);
      points[id] = grid.node(i0, j0) + t * (grid.node(i1, j1) - grid.node(i0, j0));
    }
    return id;
  };
  std::vector<std::pair<long, long>> segments;
  for (int i = 0; i + 1 < nx; ++i) {
    for (int j = 0; j + 1 < ny; ++j) {
      const bool s00 = v(i, j) >= 0, s10 = v(i + 1, j) >= 0;
      const bool s01 = v(i, j + 1) >= 0, s11 = v(i + 1, j + 1) >= 0;
      std::vector<long> ids;
      // Walk the cell boundary: bottom, right, top, left.
      if (s00 != s10) ids.push_back(crossing(h_edge(i, j), i, j, i + 1, j));
      if (s10 != s11) ids.push_back(crossing(v_edge(i + 1, j), i + 1, j, i + 1, j + 1));
      if (s01 != s11) ids.push_back(crossing(h_edge(i, j + 1), i, j + 1, i + 1, j + 1));
      if (s00 != s01) ids.push_back(crossing(v_edge(i, j), i, j, i, j + 1));
      if (ids.size() == 2) {
        segments.emplace_back(ids[0], ids[1]);
      } else if (ids.size() == 4) {
        const double centre = 0.25 * (v(i, j) + v(i + 1, j) + v(i, j + 1) + v(i + 1, j + 1));
        if ((centre >= 0) == s00) {
          segments.emplace_back(ids[0], ids[1]);
          segments.emplace_back(ids[2], ids[3]);
        } else {
          segments.emplace_back(ids[0], ids[3]);
          segments.emplace_back(ids[1], ids[2]);
        }
      }
    }
  }
  std::multimap<long, std::size_t> by_point;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    by_point.emplace(segments[s].first, s);
    by_point.emplace(segments[s].second, s);
  }
  std::vector<bool> used(segments.size(), false);
  auto next_segment = [&](long pt) -> std::optional<std::size_t> {
    auto [lo, hi] = by_point.equal_range(pt);
    for (auto it = lo; it != hi; ++it) {
      if (!used[it->second]) return it->second;
    }
    return std::nullopt;
  };
  std::vector<std::vector<Eigen::Vector2d>> lines;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (used[s]) continue;
    used[s] = true;
    std::deque<long> chain{segments[s].first, segments[s].second};
    for (int side = 0; side < 2; ++side) {
      while (true) {
        const long end = side == 0 ? chain.back() : chain.front();
        const auto nxt = next_segment(end);
        if (!nxt) break;
        used[*nxt] = true;
        const long other = segments[*nxt].first == end ? segments[*nxt].second
                                                       : segments[*nxt].first;
        if (side == 0) chain.push_back(other); else chain.push_front(other);
      }
    }
    std::vector<Eigen::Vector2d> line;
    line.reserve(chain.size());
    for (long id : chain) line.push_back(points.at(id));
    lines.push_back(std::move(line));
  }
  return lines;
}

/// CSV polyline,x0,x1 in traversal order.
inline void write_contour_csv(std::ostream& out,
                              const std::vector<std::vector<Eigen::Vector2d>>& lines) {
  out << "polyline,x0,x1\n";
  out.precision(17);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    for (const auto& p : lines[l]) out << l << ',' << p(0) << ',' << p(1) << '\n';
  }
}

}  // namespace pcbf
