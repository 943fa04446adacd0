#pragma once

#include <array>
#include <vector>

#include "actloc/common.hpp"

namespace actloc {

// Interval or axis-aligned rectangle, uniform cells, cell-center sampling.
struct Grid {
  int dim = 1;
  std::array<double, 2> extents{1.0, 1.0};
  std::array<int, 2> counts{1, 1};
  double cell_measure = 1.0;
  double total_measure = 1.0;

  int cell_count() const { return counts[0] * (dim > 1 ? counts[1] : 1); }
  double spacing(int axis) const { return extents[axis] / counts[axis]; }

  // Cell centers; storage order is x-fastest.
  double x_of(int cell) const {
    return (cell % counts[0] + 0.5) * spacing(0);
  }
  double y_of(int cell) const {
    return (cell / counts[0] + 0.5) * spacing(1);
  }
};

Grid build_grid(const std::vector<double>& extents,
                const std::vector<int>& counts);

// Discrete L2 inner product / norm with the cell measure as quadrature weight.
double inner(const Grid& grid, const Field& a, const Field& b);
double norm_l2(const Grid& grid, const Field& a);

// Tensor sine basis of the Dirichlet Laplacian, sampled at cell centers.
// Columns are L2-orthonormal under the discrete inner product.
struct EigenBasis {
  Grid grid;
  int modes = 0;
  Eigen::VectorXd eigenvalues;            // nondecreasing
  Eigen::MatrixXd functions;              // cell_count x modes
  std::vector<std::array<int, 2>> index;  // per-axis mode indices

  Eigen::VectorXd to_coeffs(const Field& f) const {
    return grid.cell_measure * (functions.transpose() * f);
  }
  Field to_field(const Eigen::VectorXd& c) const { return functions * c; }
};

EigenBasis eigenbasis(const Grid& grid, int modes);

// m({phi >= c}), a right-closed superlevel measure.
double superlevel_measure(const Field& phi, double c, const Grid& grid);

enum class ClassTag { W_binary, B_amplitude, Theta_density };

struct DensityClassSpec {
  double alpha;
  ClassTag tag;
  DensityClassSpec(double a, ClassTag t);
};

// Clip to [0,1] and restore the class mass constraint (amplitude classes
// rescale the squared mass); uniform redistribution over unsaturated cells
// when plain rescaling saturates.
Field project_to_class(const Field& values, const DensityClassSpec& spec,
                       const Grid& grid);

// Signed mass defect of a field against its class target (zero when feasible).
double class_mass(const Field& values, ClassTag tag, const Grid& grid);
bool is_feasible(const Field& values, const DensityClassSpec& spec,
                 const Grid& grid, double tol = 1e-9);

}  // namespace actloc
