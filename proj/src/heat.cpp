#include "actloc/heat.hpp"

#include <cmath>

namespace actloc {

void PdeParams::validate() const {
  if (!(T > 0.0)) throw config_error("pde: horizon T must be positive");
  if (n_t < 1) throw config_error("pde: need at least one time step");
  if (scheme == Scheme::exact_spectral && !potential_is_zero())
    throw config_error("pde: exact_spectral requires a == 0");
  if (const Field* f = std::get_if<Field>(&a)) {
    if (f->size() != basis.grid.cell_count())
      throw config_error("pde: potential field does not match the grid");
  } else if (const auto* seq = std::get_if<std::vector<Field>>(&a)) {
    if (static_cast<int>(seq->size()) != n_t + 1)
      throw config_error("pde: time-indexed potential needs n_t + 1 fields");
    for (const Field& f : *seq)
      if (f.size() != basis.grid.cell_count())
        throw config_error("pde: potential field does not match the grid");
  }
}

Eigen::VectorXd time_weights(double T, int n_t) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n_t + 1, T / n_t);
  w(0) *= 0.5;
  w(n_t) *= 0.5;
  return w;
}

SpectralModel::SpectralModel(const PdeParams& params) : params_(params) {
  params_.validate();
  dt_ = params_.T / params_.n_t;
  weights_ = time_weights(params_.T, params_.n_t);
  diagonal_ = params_.potential_is_zero();
  const Eigen::VectorXd& lam = basis().eigenvalues;
  const int m = basis().modes;

  if (diagonal_) {
    if (params_.scheme == Scheme::exact_spectral) {
      rho_ = (-dt_ * lam.array()).exp();
      kdiag_ = Eigen::VectorXd::Ones(m);
      src_left_ = rho_;
    } else {
      Eigen::ArrayXd plus = 1.0 + 0.5 * dt_ * lam.array();
      rho_ = (1.0 - 0.5 * dt_ * lam.array()) / plus;
      kdiag_ = plus.inverse();
      src_left_ = kdiag_;
    }
    return;
  }

  // Dense Galerkin operator A_j = diag(lambda) + E^T W diag(a_j) E.
  auto build = [&](const Field& a_field) {
    Eigen::MatrixXd A = Eigen::MatrixXd(lam.asDiagonal());
    A += grid().cell_measure * basis().functions.transpose() *
         a_field.asDiagonal() * basis().functions;
    return A;
  };
  if (const Field* f = std::get_if<Field>(&params_.a)) {
    a_mat_.push_back(build(*f));
  } else {
    const auto& seq = std::get<std::vector<Field>>(params_.a);
    a_mat_.reserve(seq.size());
    for (const Field& f : seq) a_mat_.push_back(build(f));
  }
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(m, m);
  for (const Eigen::MatrixXd& A : a_mat_) {
    solve_plus_.emplace_back((id + 0.5 * dt_ * A).ldlt());
    minus_.push_back(id - 0.5 * dt_ * A);
  }
}

namespace {
inline int node_of(size_t stored, int node) {
  return stored == 1 ? 0 : node;
}
}  // namespace

Eigen::VectorXd SpectralModel::step(const Eigen::VectorXd& v, int interval,
                                    bool transpose) const {
  if (diagonal_) return rho_.cwiseProduct(v);
  // Backward step operator R_j = K_j M_{j+1} (A symmetric per node).
  const int jlo = node_of(a_mat_.size(), interval);
  const int jhi = node_of(a_mat_.size(), interval + 1);
  if (transpose) return minus_[jhi] * solve_plus_[jlo].solve(v);
  return solve_plus_[jlo].solve(minus_[jhi] * v);
}

Eigen::VectorXd SpectralModel::apply_k(const Eigen::VectorXd& v,
                                       int node) const {
  if (diagonal_) return kdiag_.cwiseProduct(v);
  return solve_plus_[node_of(a_mat_.size(), node)].solve(v);
}

Eigen::MatrixXd SpectralModel::backward_coeffs(
    const DualCoefficients& z) const {
  const int m = basis().modes;
  if (z.size() > m)
    throw config_error("solve_backward: more coefficients than modes");
  Eigen::MatrixXd c(m, params_.n_t + 1);
  c.col(params_.n_t).setZero();
  c.col(params_.n_t).head(z.size()) = z;
  for (int j = params_.n_t - 1; j >= 0; --j)
    c.col(j) = step(c.col(j + 1), j, false);
  return c;
}

Eigen::MatrixXd SpectralModel::forward_coeffs(
    const Eigen::VectorXd& y0_coeffs, const Eigen::MatrixXd* sources) const {
  const int m = basis().modes;
  Eigen::MatrixXd c(m, params_.n_t + 1);
  c.col(0) = y0_coeffs;
  for (int j = 0; j < params_.n_t; ++j) {
    Eigen::VectorXd rhs;
    if (diagonal_) {
      rhs = rho_.cwiseProduct(c.col(j));
      if (sources)
        rhs += 0.5 * dt_ *
               (src_left_.cwiseProduct(sources->col(j)) + kdiag_.cwiseProduct(sources->col(j + 1)));
      c.col(j + 1) = rhs;
    } else {
      const int jlo = node_of(a_mat_.size(), j);
      const int jhi = node_of(a_mat_.size(), j + 1);
      rhs = minus_[jlo] * c.col(j);
      if (sources) rhs += 0.5 * dt_ * (sources->col(j) + sources->col(j + 1));
      c.col(j + 1) = solve_plus_[jhi].solve(rhs);
    }
  }
  return c;
}

Eigen::VectorXd SpectralModel::reverse_accumulate(
    const Eigen::MatrixXd& partials) const {
  Eigen::VectorXd g = partials.col(0);
  for (int j = 0; j < params_.n_t; ++j)
    g = step(g, j, true) + partials.col(j + 1);
  return g;
}

Eigen::MatrixXd SpectralModel::decay_profile() const {
  if (!diagonal_)
    throw config_error("decay_profile: only available without a potential");
  Eigen::MatrixXd dec(basis().modes, params_.n_t + 1);
  dec.col(params_.n_t).setOnes();
  for (int j = params_.n_t - 1; j >= 0; --j)
    dec.col(j) = rho_.cwiseProduct(dec.col(j + 1));
  return dec;
}

Trajectory SpectralModel::to_trajectory(const Eigen::MatrixXd& coeffs) const {
  Trajectory t;
  t.grid = grid();
  t.T = params_.T;
  t.values = basis().functions * coeffs;
  return t;
}

Trajectory solve_forward(const Field& y0, const Field& weight,
                         const Trajectory* control, const PdeParams& params) {
  SpectralModel model(params);
  const Grid& grid = model.grid();
  if (y0.size() != grid.cell_count() || weight.size() != grid.cell_count())
    throw config_error("solve_forward: field size does not match the grid");
  Eigen::MatrixXd sources;
  if (control) {
    if (control->values.rows() != grid.cell_count() ||
        control->nodes() != params.n_t + 1)
      throw config_error("solve_forward: control grid/time nodes mismatch");
    sources.resize(model.basis().modes, params.n_t + 1);
    for (int j = 0; j <= params.n_t; ++j)
      sources.col(j) =
          model.basis().to_coeffs(weight.cwiseProduct(control->values.col(j)));
  }
  return model.to_trajectory(model.forward_coeffs(
      model.basis().to_coeffs(y0), control ? &sources : nullptr));
}

Trajectory solve_backward(const DualCoefficients& z, const PdeParams& params) {
  SpectralModel model(params);
  return model.to_trajectory(model.backward_coeffs(z));
}

Trajectory weighted_output(const Trajectory& phi, const Field& beta) {
  if (beta.size() != phi.values.rows())
    throw config_error("weighted_output: field size mismatch");
  Trajectory out = phi;
  out.values.array().colwise() *= beta.array();
  return out;
}

double space_time_norm(const Trajectory& zeta, double q) {
  if (!(q >= 1.0 && q <= 2.0))
    throw config_error("space_time_norm: q must lie in [1,2]");
  Eigen::VectorXd w = time_weights(zeta.T, zeta.steps());
  double cm = std::sqrt(zeta.grid.cell_measure);
  double acc = 0.0;
  for (int j = 0; j < zeta.nodes(); ++j)
    acc += w(j) * std::pow(cm * zeta.values.col(j).norm(), q);
  return std::pow(acc, 1.0 / q);
}

double control_space_time_norm(const Trajectory& u, double p) {
  if (!(p >= 2.0))
    throw config_error("control_space_time_norm: p must lie in [2,inf]");
  double cm = std::sqrt(u.grid.cell_measure);
  if (std::isinf(p)) {
    double best = 0.0;
    for (int j = 0; j < u.nodes(); ++j)
      best = std::max(best, cm * u.values.col(j).norm());
    return best;
  }
  Eigen::VectorXd w = time_weights(u.T, u.steps());
  double acc = 0.0;
  for (int j = 0; j < u.nodes(); ++j)
    acc += w(j) * std::pow(cm * u.values.col(j).norm(), p);
  return std::pow(acc, 1.0 / p);
}

}  // namespace actloc
