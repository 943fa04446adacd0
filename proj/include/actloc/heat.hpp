#pragma once

#include <Eigen/Cholesky>

#include <memory>
#include <variant>

#include "actloc/grid.hpp"

namespace actloc {

enum class Scheme { exact_spectral, crank_nicolson };

// Potential a(x,t): zero, a time-independent field, or one field per node.
using Potential = std::variant<std::monostate, Field, std::vector<Field>>;

struct PdeParams {
  EigenBasis basis;
  double T = 1.0;
  int n_t = 200;
  Potential a;
  Scheme scheme = Scheme::crank_nicolson;

  void validate() const;
  bool potential_is_zero() const {
    return std::holds_alternative<std::monostate>(a);
  }
};

// Time-indexed sequence of fields at uniform nodes t_j = j T / n_t.
struct Trajectory {
  Grid grid;
  double T = 0.0;
  Eigen::MatrixXd values;  // cell_count x (n_t + 1)

  int nodes() const { return static_cast<int>(values.cols()); }
  int steps() const { return nodes() - 1; }
  double dt() const { return T / steps(); }
  Field at(int j) const { return values.col(j); }
};

// Trapezoid weights on the uniform time grid.
Eigen::VectorXd time_weights(double T, int n_t);

// Discretized propagation in the truncated eigenbasis. One CN (or exact)
// step operator per interval; diagonal whenever a == 0.
class SpectralModel {
 public:
  explicit SpectralModel(const PdeParams& params);

  const PdeParams& params() const { return params_; }
  const EigenBasis& basis() const { return params_.basis; }
  const Grid& grid() const { return params_.basis.grid; }
  double dt() const { return dt_; }
  int n_t() const { return params_.n_t; }
  const Eigen::VectorXd& weights() const { return weights_; }

  // Backward trajectory coefficients: column j holds phi(t_j; z).
  Eigen::MatrixXd backward_coeffs(const DualCoefficients& z) const;

  // Forward coefficients of y_t + A y = f with y(0) given; `sources` holds
  // projected source coefficients per node (may be null).
  Eigen::MatrixXd forward_coeffs(const Eigen::VectorXd& y0_coeffs,
                                 const Eigen::MatrixXd* sources) const;

  // Exact transpose accumulation through the backward stepping: given
  // partials p_j = dJ/d(phi coefficients at node j), returns dJ/dz.
  Eigen::VectorXd reverse_accumulate(const Eigen::MatrixXd& partials) const;

  Trajectory to_trajectory(const Eigen::MatrixXd& coeffs) const;

  bool is_diagonal() const { return diagonal_; }
  // Per-mode homogeneous decay from node j to the terminal node (diagonal
  // schemes only): column j of the returned matrix is rho^(n_t - j).
  Eigen::MatrixXd decay_profile() const;

 private:
  // Apply one homogeneous step operator R (or its transpose) for interval j.
  Eigen::VectorXd step(const Eigen::VectorXd& v, int interval,
                       bool transpose) const;
  // Source half-step kernels of the CN update.
  Eigen::VectorXd apply_k(const Eigen::VectorXd& v, int node) const;

  PdeParams params_;
  double dt_;
  Eigen::VectorXd weights_;
  bool diagonal_;
  Eigen::VectorXd rho_;      // diagonal step multiplier
  Eigen::VectorXd kdiag_;    // diagonal (I + dt/2 A)^{-1}
  Eigen::VectorXd src_left_; // weight of f_j in the source rule
  std::vector<Eigen::MatrixXd> a_mat_;  // A at each node (dense path)
  std::vector<Eigen::LDLT<Eigen::MatrixXd>> solve_plus_;  // (I + dt/2 A_j)
  std::vector<Eigen::MatrixXd> minus_;                    // (I - dt/2 A_j)
};

// y_t - Laplace(y) + a y = weight * u, Dirichlet, y(0) = y0.
Trajectory solve_forward(const Field& y0, const Field& weight,
                         const Trajectory* control, const PdeParams& params);

// phi_t + Laplace(phi) - a phi = 0 backward from phi(T) = sum z_k e_k.
Trajectory solve_backward(const DualCoefficients& z, const PdeParams& params);

// Pointwise product beta * phi per time node.
Trajectory weighted_output(const Trajectory& phi, const Field& beta);

// (int_0^T ||zeta(t)||_{L2}^q dt)^{1/q}, trapezoid in time; q in [1,2].
double space_time_norm(const Trajectory& zeta, double q);

// Same shape for the control side, p in [2, inf] (inf = sup over nodes).
double control_space_time_norm(const Trajectory& u, double p);

}  // namespace actloc
