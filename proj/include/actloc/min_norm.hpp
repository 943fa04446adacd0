#pragma once

#include "actloc/heat.hpp"

namespace actloc {

enum class StepRule { cg_quadratic, backtracking_gradient };

struct DualSolveOptions {
  double tikhonov = 1e-8;       // weight on ||z||^2
  int max_iterations = 2000;
  double grad_tolerance = 1e-11;
  double smoothing_delta = 1e-6;  // smooths ||zeta(t)|| near zero for q < 2
  StepRule step_rule = StepRule::cg_quadratic;

  void validate(double q) const {
    if (tikhonov < 0.0) throw config_error("dual solve: tikhonov must be >= 0");
    if (q < 2.0 && !(smoothing_delta > 0.0))
      throw config_error("dual solve: smoothing delta must be positive for q < 2");
  }
};

struct MinNormResult {
  DualCoefficients zbar;
  Trajectory zeta;             // beta * phi(.; zbar)
  double value_q = 0.0;        // V_q, tikhonov part excluded
  double min_norm = 0.0;       // N_p = sqrt(-2 V_q)
  double min_norm_from_control = 0.0;  // ||u||_{L^p}, independent route
  Trajectory control;
  double terminal_residual = 0.0;      // ||y(T; beta, u)|| from a forward solve
  double gramian_min = 0.0;    // extreme Rayleigh quotients of the
  double gramian_max = 0.0;    // weighted Gramian (conditioning diagnostic)
  std::vector<double> objective_history;
  int iterations = 0;
};

// Weighted Gramian G with weight theta = beta^2 over the truncated basis,
// assembled consistently with the trapezoid-in-time discrete functional.
Eigen::MatrixXd weighted_gramian(const Field& theta,
                                 const SpectralModel& model);

// Pairing vector b_k = <y0, phi(0; e_k)>.
Eigen::VectorXd dual_pairing_vector(const Field& y0,
                                    const SpectralModel& model);

// J(z; beta, q) = 1/2 ||beta phi(.;z)||^2_{L^q(0,T;L2)} + <y0, phi(0;z)>.
double j_eval(const DualCoefficients& z, const Field& beta, double q,
              const Field& y0, const PdeParams& params);

// Gradient of the delta-smoothed, tikhonov-regularized functional; exact
// transpose of the discretized evaluation.
DualCoefficients j_grad(const DualCoefficients& z, const Field& beta, double q,
                        const Field& y0, const PdeParams& params,
                        const DualSolveOptions& options);

MinNormResult solve_min_j(const Field& beta, double q, const Field& y0,
                          const PdeParams& params,
                          const DualSolveOptions& options);

// u(x,t) = ||zeta||_{L^q}^{2-q} ||zeta(.,t)||^{q-2} zeta(x,t), 1/p + 1/q = 1.
Trajectory recover_control(const Trajectory& zeta, double p);

// |V_q + 1/2 N_p^2| / max(1, N_p^2) with N_p recomputed as ||u||_{L^p}.
double verify_value_relation(const Field& beta, double p, const Field& y0,
                             const PdeParams& params,
                             const DualSolveOptions& options);

double conjugate_exponent(double p);

}  // namespace actloc
