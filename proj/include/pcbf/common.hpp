#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace pcbf {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using RowVec = Eigen::RowVectorXd;

/// Raised for malformed experiment configuration or schema violations.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a computation produces a non-finite quantity.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_dim(Eigen::Index actual, Eigen::Index expected,
                        const char* what) {
  if (actual != expected) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                std::to_string(expected) + ", got " +
                                std::to_string(actual));
  }
}

}  // namespace pcbf
