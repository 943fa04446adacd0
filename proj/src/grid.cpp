#include "actloc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace actloc {

Grid build_grid(const std::vector<double>& extents,
                const std::vector<int>& counts) {
  if (extents.empty() || extents.size() > 2 || extents.size() != counts.size())
    throw config_error("grid: need matching extents/counts for dimension 1 or 2");
  Grid g;
  g.dim = static_cast<int>(extents.size());
  g.cell_measure = 1.0;
  for (int ax = 0; ax < g.dim; ++ax) {
    if (!(extents[ax] > 0.0))
      throw config_error("grid: extent must be positive");
    if (counts[ax] <= 0)
      throw config_error("grid: cell count must be positive");
    g.extents[ax] = extents[ax];
    g.counts[ax] = counts[ax];
    g.cell_measure *= extents[ax] / counts[ax];
  }
  g.total_measure = g.cell_measure * g.cell_count();
  return g;
}

double inner(const Grid& grid, const Field& a, const Field& b) {
  return grid.cell_measure * a.dot(b);
}

double norm_l2(const Grid& grid, const Field& a) {
  return std::sqrt(grid.cell_measure) * a.norm();
}

EigenBasis eigenbasis(const Grid& grid, int modes) {
  const int n = grid.cell_count();
  if (modes < 1 || modes > n)
    throw config_error("eigenbasis: mode count must be in [1, cell count]");

  struct Cand {
    double lambda;
    std::array<int, 2> k;
  };
  std::vector<Cand> cands;
  const double pi = std::numbers::pi;
  if (grid.dim == 1) {
    for (int k = 1; k <= grid.counts[0]; ++k) {
      double r = k / grid.extents[0];
      cands.push_back({pi * pi * r * r, {k, 0}});
    }
  } else {
    for (int kx = 1; kx <= grid.counts[0]; ++kx)
      for (int ky = 1; ky <= grid.counts[1]; ++ky) {
        double rx = kx / grid.extents[0], ry = ky / grid.extents[1];
        cands.push_back({pi * pi * (rx * rx + ry * ry), {kx, ky}});
      }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.lambda != b.lambda) return a.lambda < b.lambda;
    return a.k < b.k;
  });
  if (modes > static_cast<int>(cands.size()))
    throw config_error("eigenbasis: mode count exceeds resolvable modes");

  EigenBasis basis;
  basis.grid = grid;
  basis.modes = modes;
  basis.eigenvalues.resize(modes);
  basis.functions.resize(n, modes);
  basis.index.resize(modes);
  for (int m = 0; m < modes; ++m) {
    basis.eigenvalues(m) = cands[m].lambda;
    basis.index[m] = cands[m].k;
    const auto [kx, ky] = cands[m].k;
    for (int c = 0; c < n; ++c) {
      double v = std::sqrt(2.0 / grid.extents[0]) *
                 std::sin(kx * pi * grid.x_of(c) / grid.extents[0]);
      if (grid.dim == 2)
        v *= std::sqrt(2.0 / grid.extents[1]) *
             std::sin(ky * pi * grid.y_of(c) / grid.extents[1]);
      basis.functions(c, m) = v;
    }
    // Cell-center sampling keeps interior sine modes discretely orthogonal;
    // normalize against the discrete norm so the Gram matrix is identity
    // even for the highest per-axis index.
    double nrm = std::sqrt(grid.cell_measure) * basis.functions.col(m).norm();
    basis.functions.col(m) /= nrm;
  }
  return basis;
}

double superlevel_measure(const Field& phi, double c, const Grid& grid) {
  long count = (phi.array() >= c).count();
  return count * grid.cell_measure;
}

DensityClassSpec::DensityClassSpec(double a, ClassTag t) : alpha(a), tag(t) {
  if (!(a > 0.0 && a < 1.0))
    throw config_error("density class: alpha must lie in (0,1)");
}

double class_mass(const Field& values, ClassTag tag, const Grid& grid) {
  if (tag == ClassTag::B_amplitude)
    return grid.cell_measure * values.squaredNorm();
  return grid.cell_measure * values.sum();
}

bool is_feasible(const Field& values, const DensityClassSpec& spec,
                 const Grid& grid, double tol) {
  if ((values.array() < -tol).any() || (values.array() > 1.0 + tol).any())
    return false;
  if (spec.tag == ClassTag::W_binary) {
    for (int i = 0; i < values.size(); ++i)
      if (std::abs(values(i)) > tol && std::abs(values(i) - 1.0) > tol)
        return false;
    double target = spec.alpha * grid.total_measure;
    return std::abs(class_mass(values, spec.tag, grid) - target) <=
           grid.cell_measure + tol;
  }
  double target = spec.alpha * grid.total_measure;
  return std::abs(class_mass(values, spec.tag, grid) - target) <= tol;
}

namespace {

// Project a density onto {0 <= t <= 1, sum t * cell = target}.
Field project_density(Field t, double cell, double target) {
  t = t.cwiseMax(0.0).cwiseMin(1.0);
  for (int pass = 0; pass < 100; ++pass) {
    double mass = cell * t.sum();
    if (std::abs(mass - target) <= 1e-13 * std::max(1.0, target)) return t;
    if (mass > target) {
      t *= target / mass;  // shrink keeps the box constraint
      return t;
    }
    // Deficit: scale up if possible, otherwise spread uniformly over
    // unsaturated cells.
    if (mass > 0.0) {
      Field scaled = (t * (target / mass)).cwiseMin(1.0);
      if (cell * scaled.sum() >= target - 1e-13 * std::max(1.0, target)) {
        // Overshoot from clipping is corrected on the next pass.
        t = scaled;
        continue;
      }
      t = scaled;
    }
    long free = (t.array() < 1.0).count();
    if (free == 0)
      throw feasibility_error("project_to_class: target mass exceeds m(Omega)");
    double add = (target - cell * t.sum()) / (cell * free);
    for (int i = 0; i < t.size(); ++i)
      if (t(i) < 1.0) t(i) = std::min(1.0, t(i) + add);
  }
  return t;
}

}  // namespace

Field project_to_class(const Field& values, const DensityClassSpec& spec,
                       const Grid& grid) {
  if (!values.allFinite())
    throw feasibility_error("project_to_class: non-finite input");
  double target = spec.alpha * grid.total_measure;
  if (target > grid.total_measure)
    throw feasibility_error("project_to_class: infeasible target mass");
  switch (spec.tag) {
    case ClassTag::Theta_density:
      return project_density(values, grid.cell_measure, target);
    case ClassTag::B_amplitude: {
      Field theta = values.cwiseMax(0.0).cwiseMin(1.0).array().square();
      return project_density(theta, grid.cell_measure, target)
          .cwiseSqrt();
    }
    case ClassTag::W_binary: {
      // Nearest achievable binary mass: take the top-k cells.
      int k = static_cast<int>(std::lround(target / grid.cell_measure));
      k = std::clamp(k, 0, static_cast<int>(values.size()));
      std::vector<int> order(values.size());
      for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return values(a) > values(b); });
      Field mask = Field::Zero(values.size());
      for (int i = 0; i < k; ++i) mask(order[i]) = 1.0;
      return mask;
    }
  }
  throw config_error("project_to_class: unknown class tag");
}

}  // namespace actloc
