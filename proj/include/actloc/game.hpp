#pragma once

#include <cstdint>

#include "actloc/bathtub.hpp"
#include "actloc/min_norm.hpp"

namespace actloc {

enum class GpStepRule { polyak, diminishing };

struct Gp2Options {
  int max_iterations = 200;
  GpStepRule step_rule = GpStepRule::polyak;
  double tie_smoothing = 1e-12;       // tie-set width forwarded to probes
  double objective_tolerance = 1e-10; // relative decrease tolerance
  double subgradient_tolerance = 1e-9;
  int restarts = 3;
  std::uint64_t seed = 0;
  double damping = 0.5;               // theta relaxation in alternating loops
  DualSolveOptions dual;              // inner quadratic solves

  void validate() const {
    if (max_iterations < 1 || !(objective_tolerance > 0.0) ||
        !(subgradient_tolerance > 0.0) || restarts < 1 ||
        !(damping > 0.0 && damping <= 1.0))
      throw config_error("gp2 options: invalid tolerances");
  }
};

struct Gp2Result {
  DualCoefficients zbar;
  Trajectory psibar;
  Field theta;                  // saddle density of the sup player
  Field fbar;                   // time-integrated squared adjoint energy
  double value = 0.0;           // GP2 objective at zbar
  double lower_bound = 0.0;     // best certified inner-minimum bound
  double gap = 0.0;             // value - lower_bound (duality gap)
  double subgradient_norm = 0.0;
  std::vector<double> history;  // best objective per iteration
};

struct ActuatorExtract {
  Field mask;    // binary actuator
  Field theta;   // relaxed density
  BathtubSolution binary;
  BathtubSolution relaxed;
  bool degenerate_level_set = false;
};

struct NashResidual {
  double r_theta = 0.0;  // sup-side violation
  double r_psi = 0.0;    // inf-side violation
};

struct SampleRow {
  int index = 0;
  double min_norm = 0.0;
  double gap = 0.0;  // sample N_p minus reference N_p
  bool failed = false;
};

struct SampleTable {
  std::vector<SampleRow> rows;
  double reference = 0.0;  // N_p of the candidate actuator
  int violations = 0;      // samples strictly better than the candidate
  double min_gap = 0.0;
};

struct RelaxedLocationResult {
  Field beta;
  Field theta;
  double min_norm = 0.0;
  DualCoefficients zbar;
  Field aggregate;              // final ascent weight field
  std::vector<double> history;  // N_p per outer iteration
};

// Payoff in the GP2 orientation: 1/2 ||sqrt(theta) psi||^2_{L^q(0,T;L2)}
// plus the initial-data pairing.  f_eval is its game-theoretic negative.
double game_payoff(const Field& theta, const Trajectory& psi, double q,
                   const Field& y0);
double f_eval(const Field& theta, const Trajectory& psi, double q,
              const Field& y0);

// Pointwise int_0^T psibar(x,t) psi(x,t) dt; with psi == psibar this is the
// energy field G_psibar.
Field cross_energy_field(const Trajectory& psibar, const Trajectory& psi);

// sup over densities of the weighted L^q(0,T;L2) norm.
double nf_norm(const Trajectory& psi, double q, double alpha,
               const Grid& grid);

// Subgradient descent with certified Polyak targets on
// Phi(z) = 1/2 sup_theta <theta, G_phi(z)> + <y0, phi(0;z)>  (q = 2).
Gp2Result solve_gp2(const Field& y0, double alpha, double q,
                    const PdeParams& params, const Gp2Options& options);

ActuatorExtract extract_actuator(const Field& fbar, double alpha,
                                 const Grid& grid, TieRule tie_rule);

NashResidual nash_residual(const Field& theta_bar, const DualCoefficients& zbar,
                           const Field& y0, double q, double alpha,
                           const PdeParams& params, int theta_probes,
                           int psi_probes, std::uint64_t seed);

SampleTable optimality_sample_test(const Field& omega_mask, const Field& y0,
                                   double alpha, double p,
                                   const PdeParams& params, int n_samples,
                                   std::uint64_t seed);

// Alternating scheme for general q in [1,2]: inner dual solve, damped
// bathtub ascent on the q-weighted time-aggregated energy.
RelaxedLocationResult solve_relaxed_location(const Field& y0, double alpha,
                                             double q, const PdeParams& params,
                                             const Gp2Options& options);

}  // namespace actloc
