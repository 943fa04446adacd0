#pragma once

#include <vector>

#include "actloc/grid.hpp"

namespace actloc {

enum class TieRule { lowest_index, symmetric_pairing };

// Solution of sup over densities theta (mass alpha * m(Omega)) of
// the linear functional int theta * phi dx.
struct BathtubSolution {
  double threshold = 0.0;      // c_phi
  double alpha_upper = 0.0;    // measure fraction of {phi >= c_phi}
  double alpha_lower = 0.0;    // measure fraction of {phi >  c_phi}
  Field maximizer;             // theta* (relaxed) or binary mask
  double value = 0.0;
  std::vector<int> tie_cells;  // cells with phi == c_phi (within tolerance)
  double tie_mass = 0.0;       // (alpha - alpha_lower) * m(Omega)
  double measure_defect = 0.0; // binary masks: |achieved - target| mass
  bool degenerate = false;     // constant phi: every feasible theta optimal
};

struct BathtubThresholds {
  double threshold;
  double alpha_upper;
  double alpha_lower;
};

// c_phi = max{ c : m({phi >= c}) >= alpha m(Omega) } by descending scan.
BathtubThresholds bathtub_threshold(const Field& phi, double alpha,
                                    const Grid& grid);

// Relaxed maximizer: 1 above the threshold, 0 below, uniform tie split.
BathtubSolution bathtub_max_relaxed(const Field& phi, double alpha,
                                    const Grid& grid);

// Binary maximizer; ties filled per rule until the nearest achievable mass.
BathtubSolution bathtub_max_binary(const Field& phi, double alpha,
                                   const Grid& grid,
                                   TieRule tie_rule = TieRule::lowest_index);

// Membership in the solution set: theta == 1 on {phi > c}, 0 on {phi < c}.
bool in_solution_set(const Field& theta, const Field& phi, double alpha,
                     const Grid& grid);

// Exhaustive oracle over binary masks of the required cardinality.
double bathtub_bruteforce(const Field& phi, double alpha, const Grid& grid);

}  // namespace actloc
