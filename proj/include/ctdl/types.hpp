#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ctdl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Environment observations are small dense vectors (2-D for both tasks).
using Observation = Vector;

// Invalid configuration or degenerate inputs. The CLI maps these to exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or invariant-violating files.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite math is required.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ctdl
