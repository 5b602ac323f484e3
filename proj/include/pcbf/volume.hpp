#pragma once

// Monte-Carlo volume of the learned set and 2-D slices of h_theta.

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <random>

#include "pcbf/barrier.hpp"

namespace pcbf {

struct VolumeEstimate {
  double volume = 0.0;
  double std_error = 0.0;
  double fraction = 0.0;
  std::int64_t hits = 0;
  std::int64_t samples = 0;
};

/// Uniform sampling over the state box; vol = vol(box) * hit fraction with
/// binomial standard error vol(box) sqrt(p (1 - p) / n). `inside` is called
/// on column batches and returns one value per column; >= 0 counts as a hit.
template <typename BatchFn>
VolumeEstimate monte_carlo_volume(const Box& box, BatchFn&& inside, std::int64_t n,
                                  std::uint64_t seed, int chunk = 4096) {
  if (n < 1) throw std::invalid_argument("monte_carlo_volume: need n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int dim = box.dim();
  VolumeEstimate est;
  est.samples = n;
  for (std::int64_t start = 0; start < n; start += chunk) {
    const auto count = static_cast<Eigen::Index>(std::min<std::int64_t>(chunk, n - start));
    Mat pts(dim, count);
    for (Eigen::Index j = 0; j < count; ++j) {
      for (int i = 0; i < dim; ++i) pts(i, j) = box.lo(i) + unit(rng) * (box.hi(i) - box.lo(i));
    }
    const RowVec v = inside(pts);
    for (Eigen::Index j = 0; j < count; ++j) est.hits += v(j) >= 0.0;
  }
  const double p = static_cast<double>(est.hits) / static_cast<double>(n);
  est.fraction = p;
  est.volume = box.volume() * p;
  est.std_error = box.volume() * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  return est;
}

inline VolumeEstimate monte_carlo_volume(const Ncbf& barrier, std::int64_t n,
                                         std::uint64_t seed) {
  return monte_carlo_volume(
      barrier.system().state_box, [&](const Mat& pts) { return barrier.values(pts); }, n,
      seed);
}

struct SliceSpec {
  std::array<int, 2> dims{0, 1};
  Vec fixed;        // values of every coordinate; the two slice dims are overwritten
  int resolution = 101;
};

struct SliceGrid {
  std::array<int, 2> dims{0, 1};
  Vec axis0, axis1;
  Mat values;  // values(i, j) at (axis0(i), axis1(j))
};

/// h_theta over a resolution x resolution grid spanning the state box in the
/// two chosen dimensions. Resolution 1 samples the box centre.
inline SliceGrid slice_values(const Ncbf& barrier, const SliceSpec& spec) {
  const Box& box = barrier.system().state_box;
  const int n = box.dim();
  if (spec.resolution < 1) throw std::invalid_argument("slice: resolution must be >= 1");
  for (int d : spec.dims) {
    if (d < 0 || d >= n) throw std::invalid_argument("slice: dimension out of range");
  }
  if (spec.dims[0] == spec.dims[1]) throw std::invalid_argument("slice: dims must differ");
  Vec base = spec.fixed.size() == 0 ? Vec(Vec::Zero(n)) : spec.fixed;
  require_dim(base.size(), n, "slice fixed values");

  auto axis = [&](int d) {
    Vec a(spec.resolution);
    if (spec.resolution == 1) {
      a(0) = 0.5 * (box.lo(d) + box.hi(d));
    } else {
      for (int i = 0; i < spec.resolution; ++i) {
        a(i) = box.lo(d) + (box.hi(d) - box.lo(d)) * i / (spec.resolution - 1);
      }
    }
    return a;
  };
  SliceGrid out;
  out.dims = spec.dims;
  out.axis0 = axis(spec.dims[0]);
  out.axis1 = axis(spec.dims[1]);
  out.values.resize(spec.resolution, spec.resolution);
  Mat pts(n, spec.resolution);
  for (int i = 0; i < spec.resolution; ++i) {
    for (int j = 0; j < spec.resolution; ++j) {
      pts.col(j) = base;
      pts(spec.dims[0], j) = out.axis0(i);
      pts(spec.dims[1], j) = out.axis1(j);
    }
    out.values.row(i) = barrier.values(pts);
  }
  return out;
}

/// Columns: x<d0>, x<d1>, h_theta.
inline void write_slice_csv(std::ostream& out, const SliceGrid& s) {
  out << 'x' << s.dims[0] << ",x" << s.dims[1] << ",h_theta\n";
  out.precision(17);
  for (Eigen::Index i = 0; i < s.axis0.size(); ++i) {
    for (Eigen::Index j = 0; j < s.axis1.size(); ++j) {
      out << s.axis0(i) << ',' << s.axis1(j) << ',' << s.values(i, j) << '\n';
    }
  }
}

}  // namespace pcbf
