#include "actloc/min_norm.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace actloc {

namespace {

void check_weight(const Field& beta, const Grid& grid) {
  if (beta.size() != grid.cell_count())
    throw config_error("min_norm: weight does not match the grid");
  if ((beta.array() < -1e-9).any() || (beta.array() > 1.0 + 1e-9).any())
    throw feasibility_error("min_norm: weight must take values in [0,1]");
}

// Per-node partials of the (smoothed) q-norm part of J with respect to the
// backward coefficients; shared by the evaluator and the gradient.
struct NodeData {
  Eigen::MatrixXd phi;     // fields per node
  Eigen::VectorXd s;       // ||zeta_j||^2
};

NodeData node_data(const Eigen::MatrixXd& coeffs, const Field& beta,
                   const SpectralModel& model) {
  NodeData nd;
  nd.phi = model.basis().functions * coeffs;
  const int nodes = static_cast<int>(nd.phi.cols());
  nd.s.resize(nodes);
  const double cell = model.grid().cell_measure;
  for (int j = 0; j < nodes; ++j)
    nd.s(j) = cell * beta.cwiseProduct(nd.phi.col(j)).squaredNorm();
  return nd;
}

double q_part(const Eigen::VectorXd& s, const Eigen::VectorXd& w, double q,
              double delta) {
  if (q == 2.0) return 0.5 * w.dot(s);
  double acc = 0.0;
  for (int j = 0; j < s.size(); ++j)
    acc += w(j) * std::pow(s(j) + delta * delta, 0.5 * q);
  return 0.5 * std::pow(acc, 2.0 / q);
}

double smoothed_eval(const DualCoefficients& z, const Field& beta, double q,
                     const Field& y0, const SpectralModel& model,
                     double delta, double eps) {
  Eigen::MatrixXd coeffs = model.backward_coeffs(z);
  NodeData nd = node_data(coeffs, beta, model);
  double lin = inner(model.grid(), y0, nd.phi.col(0));
  return q_part(nd.s, model.weights(), q, delta) + lin +
         eps * z.squaredNorm();
}

DualCoefficients smoothed_grad(const DualCoefficients& z, const Field& beta,
                               double q, const Field& y0,
                               const SpectralModel& model, double delta,
                               double eps) {
  Eigen::MatrixXd coeffs = model.backward_coeffs(z);
  NodeData nd = node_data(coeffs, beta, model);
  const Eigen::VectorXd& w = model.weights();
  const double cell = model.grid().cell_measure;
  const Field theta = beta.array().square();
  const int nodes = static_cast<int>(nd.phi.cols());

  Eigen::VectorXd factor(nodes);
  if (q == 2.0) {
    factor.setOnes();
  } else {
    double acc = 0.0;
    for (int j = 0; j < nodes; ++j)
      acc += w(j) * std::pow(nd.s(j) + delta * delta, 0.5 * q);
    double outer = std::pow(acc, (2.0 - q) / q);
    for (int j = 0; j < nodes; ++j)
      factor(j) = outer * std::pow(nd.s(j) + delta * delta, 0.5 * q - 1.0);
  }
  Eigen::MatrixXd partials(model.basis().modes, nodes);
  for (int j = 0; j < nodes; ++j)
    partials.col(j) =
        (w(j) * factor(j) * cell) *
        (model.basis().functions.transpose() *
         theta.cwiseProduct(nd.phi.col(j)));
  partials.col(0) += model.basis().to_coeffs(y0);
  return model.reverse_accumulate(partials) + 2.0 * eps * z;
}

// CG on (G + 2 eps I) z = -b, recording the quadratic objective.
struct CgOutcome {
  Eigen::VectorXd z;
  std::vector<double> objective;
  int iterations = 0;
};

CgOutcome cg_solve(const Eigen::MatrixXd& G, const Eigen::VectorXd& b,
                   double eps, double tol, int max_iter) {
  const int m = static_cast<int>(b.size());
  auto apply = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return G * v + 2.0 * eps * v;
  };
  auto objective = [&](const Eigen::VectorXd& z) {
    return 0.5 * z.dot(G * z) + b.dot(z) + eps * z.squaredNorm();
  };
  CgOutcome out;
  out.z = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd r = -b;  // residual of (G+2eps)z = -b at z=0
  Eigen::VectorXd d = r;
  double rr = r.squaredNorm();
  const double stop = tol * std::max(1.0, b.norm());
  out.objective.push_back(objective(out.z));
  double best_r = std::sqrt(rr);
  int stall = 0;
  for (int it = 0; it < max_iter && std::sqrt(rr) > stop; ++it) {
    Eigen::VectorXd Ad = apply(d);
    double dAd = d.dot(Ad);
    if (dAd <= 0.0) break;  // numerically semidefinite direction
    double step = rr / dAd;
    out.z += step * d;
    r -= step * Ad;
    double rr_new = r.squaredNorm();
    d = r + (rr_new / rr) * d;
    rr = rr_new;
    out.objective.push_back(objective(out.z));
    ++out.iterations;
    if (std::sqrt(rr) < best_r * 0.999) {
      best_r = std::sqrt(rr);
      stall = 0;
    } else if (++stall > 50) {
      break;  // floating-point plateau on an ill-conditioned Gramian
    }
  }
  if (std::sqrt(rr) > 1e-6 * std::max(1.0, b.norm()))
    throw solver_error("cg: no convergence on the dual quadratic",
                       out.objective);
  return out;
}

}  // namespace

double conjugate_exponent(double p) {
  if (std::isinf(p)) return 1.0;
  if (!(p >= 2.0)) throw config_error("conjugate_exponent: p must be in [2,inf]");
  return p / (p - 1.0);
}

Eigen::MatrixXd weighted_gramian(const Field& theta,
                                 const SpectralModel& model) {
  const int m = model.basis().modes;
  Eigen::MatrixXd G(m, m);
  if (model.is_diagonal()) {
    // G = P .* (Dec W Dec^T) with P the projected weight and Dec the
    // per-mode decay profile of the homogeneous backward steps.
    Eigen::MatrixXd P = model.grid().cell_measure *
                        model.basis().functions.transpose() *
                        theta.asDiagonal() * model.basis().functions;
    Eigen::MatrixXd dec = model.decay_profile();
    G = P.cwiseProduct(dec * model.weights().asDiagonal() * dec.transpose());
    return 0.5 * (G + G.transpose());
  }
  for (int k = 0; k < m; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Unit(m, k);
    Eigen::MatrixXd coeffs = model.backward_coeffs(e);
    Eigen::MatrixXd phi = model.basis().functions * coeffs;
    Eigen::MatrixXd partials(m, phi.cols());
    const double cell = model.grid().cell_measure;
    for (int j = 0; j < phi.cols(); ++j)
      partials.col(j) = (model.weights()(j) * cell) *
                        (model.basis().functions.transpose() *
                         theta.cwiseProduct(phi.col(j)));
    G.col(k) = model.reverse_accumulate(partials);
  }
  // Symmetrize away roundoff.
  return 0.5 * (G + G.transpose());
}

Eigen::VectorXd dual_pairing_vector(const Field& y0,
                                    const SpectralModel& model) {
  Eigen::MatrixXd partials =
      Eigen::MatrixXd::Zero(model.basis().modes, model.n_t() + 1);
  partials.col(0) = model.basis().to_coeffs(y0);
  return model.reverse_accumulate(partials);
}

double j_eval(const DualCoefficients& z, const Field& beta, double q,
              const Field& y0, const PdeParams& params) {
  if (!(q >= 1.0 && q <= 2.0))
    throw config_error("j_eval: q must lie in [1,2]");
  SpectralModel model(params);
  check_weight(beta, model.grid());
  return smoothed_eval(z, beta, q, y0, model, 0.0, 0.0);
}

DualCoefficients j_grad(const DualCoefficients& z, const Field& beta, double q,
                        const Field& y0, const PdeParams& params,
                        const DualSolveOptions& options) {
  if (!(q >= 1.0 && q <= 2.0))
    throw config_error("j_grad: q must lie in [1,2]");
  options.validate(q);
  SpectralModel model(params);
  check_weight(beta, model.grid());
  double delta = q < 2.0 ? options.smoothing_delta : 0.0;
  return smoothed_grad(z, beta, q, y0, model, delta, options.tikhonov);
}

MinNormResult solve_min_j(const Field& beta, double q, const Field& y0,
                          const PdeParams& params,
                          const DualSolveOptions& options) {
  if (!(q >= 1.0 && q <= 2.0))
    throw config_error("solve_min_j: q must lie in [1,2]");
  options.validate(q);
  SpectralModel model(params);
  check_weight(beta, model.grid());
  if (norm_l2(model.grid(), y0) == 0.0)
    throw config_error("solve_min_j: y0 must be nonzero");

  const Field theta = beta.array().square();
  Eigen::MatrixXd G = weighted_gramian(theta, model);
  Eigen::VectorXd b = dual_pairing_vector(y0, model);

  MinNormResult res;
  CgOutcome cg = cg_solve(G, b, options.tikhonov, options.grad_tolerance,
                          std::max(options.max_iterations, 4 * (int)b.size()));
  res.zbar = cg.z;
  res.objective_history = cg.objective;
  res.iterations = cg.iterations;

  if (q < 2.0) {
    // Warm start from the quadratic solution, then Armijo descent on the
    // smoothed functional.
    DualCoefficients z = cg.z;
    double delta = options.smoothing_delta;
    double eps = options.tikhonov;
    double J = smoothed_eval(z, beta, q, y0, model, delta, eps);
    std::vector<double> hist{J};
    double step = 1.0;
    DualCoefficients g = smoothed_grad(z, beta, q, y0, model, delta, eps);
    const double g0 = g.norm();
    const double stop =
        options.grad_tolerance * std::max(1.0, g0);
    int it = 0;
    for (; it < options.max_iterations && g.norm() > stop; ++it) {
      double gn2 = g.squaredNorm();
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        DualCoefficients zt = z - step * g;
        double Jt = smoothed_eval(zt, beta, q, y0, model, delta, eps);
        if (Jt <= J - 1e-4 * step * gn2) {
          z = zt;
          J = Jt;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      hist.push_back(J);
      if (!accepted) break;  // step underflow: gradient-scale convergence
      step *= 2.0;
      g = smoothed_grad(z, beta, q, y0, model, delta, eps);
    }
    if (g.norm() > 1e3 * stop && it == options.max_iterations)
      throw solver_error("solve_min_j: gradient descent did not converge",
                         hist);
    res.zbar = z;
    res.objective_history = hist;
    res.iterations = it;
  }

  Eigen::MatrixXd coeffs = model.backward_coeffs(res.zbar);
  Trajectory phi = model.to_trajectory(coeffs);
  res.zeta = weighted_output(phi, beta);
  res.value_q = smoothed_eval(res.zbar, beta, q, y0, model, 0.0, 0.0);
  res.min_norm = std::sqrt(std::max(0.0, -2.0 * res.value_q));

  double p = q > 1.0 ? q / (q - 1.0) : std::numeric_limits<double>::infinity();
  res.control = recover_control(res.zeta, p);
  res.min_norm_from_control = control_space_time_norm(res.control, p);

  Trajectory y = solve_forward(y0, beta, &res.control, params);
  res.terminal_residual = norm_l2(model.grid(), y.values.col(y.steps()));

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G,
                                                    Eigen::EigenvaluesOnly);
  res.gramian_min = es.eigenvalues().minCoeff();
  res.gramian_max = es.eigenvalues().maxCoeff();
  return res;
}

Trajectory recover_control(const Trajectory& zeta, double p) {
  double q = conjugate_exponent(p);
  if (zeta.values.norm() == 0.0)
    throw feasibility_error("recover_control: zeta is identically zero");
  if (q == 2.0) return zeta;
  double nq = space_time_norm(zeta, q);
  double outer = std::pow(nq, 2.0 - q);
  const double cm = std::sqrt(zeta.grid.cell_measure);
  Trajectory u = zeta;
  for (int j = 0; j < u.nodes(); ++j) {
    double slice = cm * zeta.values.col(j).norm();
    // Zero slices map to zero by convention (negative exponent otherwise).
    u.values.col(j) *=
        slice > 0.0 ? outer * std::pow(slice, q - 2.0) : 0.0;
  }
  return u;
}

double verify_value_relation(const Field& beta, double p, const Field& y0,
                             const PdeParams& params,
                             const DualSolveOptions& options) {
  double q = conjugate_exponent(p);
  MinNormResult res = solve_min_j(beta, q, y0, params, options);
  double n2 = res.min_norm_from_control * res.min_norm_from_control;
  return std::abs(res.value_q + 0.5 * n2) / std::max(1.0, n2);
}

}  // namespace actloc
