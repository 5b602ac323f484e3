#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

#include "pcbf/systems.hpp"

namespace pcbf {

/// Diagonal Gaussian around the anchor state, sigma_i = extent_i / k,
/// with draws clipped into the state box.
class GaussianSampler {
 public:
  GaussianSampler(Vec mean, Vec sigma, Box state_box, int batch_size,
                  std::uint64_t seed)
      : mean_(std::move(mean)),
        sigma_(std::move(sigma)),
        box_(std::move(state_box)),
        batch_(batch_size),
        rng_(seed) {
    require_dim(sigma_.size(), mean_.size(), "GaussianSampler sigma");
    require_dim(box_.dim(), mean_.size(), "GaussianSampler box");
    if (batch_ <= 0) throw std::invalid_argument("GaussianSampler: batch size must be positive");
    if ((sigma_.array() < 0.0).any()) {
      throw std::invalid_argument("GaussianSampler: negative sigma");
    }
  }

  /// sigma_i = (hi_i - lo_i) / k.
  static GaussianSampler from_width_divisor(const Vec& mean, const Box& box, double k,
                                            int batch_size, std::uint64_t seed) {
    if (!(k > 0.0)) throw std::invalid_argument("GaussianSampler: k must be positive");
    return {mean, box.extent() / k, box, batch_size, seed};
  }

  const Vec& mean() const { return mean_; }
  const Vec& sigma() const { return sigma_; }
  int batch_size() const { return batch_; }

  /// Draws the next batch, one state per column.
  Mat sample() {
    const Eigen::Index n = mean_.size();
    Mat out(n, batch_);
    for (int j = 0; j < batch_; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const double z = normal_(rng_);
        out(i, j) = std::clamp(mean_(i) + sigma_(i) * z, box_.lo(i), box_.hi(i));
      }
    }
    return out;
  }

 private:
  Vec mean_;
  Vec sigma_;
  Box box_;
  int batch_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline Mat sample_batch(GaussianSampler& sampler) { return sampler.sample(); }

}  // namespace pcbf
