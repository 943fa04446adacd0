#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>
#include <vector>

namespace actloc {

// A spatial function sampled per grid cell (piecewise constant).
using Field = Eigen::VectorXd;

// Coefficients of terminal data in the truncated eigenbasis.
using DualCoefficients = Eigen::VectorXd;

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct feasibility_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-convergence diagnostics carry the tail of the objective history.
struct solver_error : std::runtime_error {
  std::vector<double> history;
  solver_error(const std::string& what, std::vector<double> hist = {})
      : std::runtime_error(what), history(std::move(hist)) {}
};

}  // namespace actloc
