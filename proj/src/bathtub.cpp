#include "actloc/bathtub.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace actloc {

namespace {

double tie_tol(double c) { return 1e-9 * std::max(1.0, std::abs(c)); }

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw config_error("bathtub: alpha must lie in (0,1)");
}

// Value of int theta*phi summed in ascending cell order, so that identical
// selections produce bit-identical sums across routines.
double mask_value(const Field& phi, const std::vector<char>& in,
                  double cell) {
  double s = 0.0;
  for (size_t i = 0; i < in.size(); ++i)
    if (in[i]) s += phi(static_cast<int>(i));
  return cell * s;
}

int mirror_cell(int cell, const Grid& grid) {
  int ix = cell % grid.counts[0];
  int iy = cell / grid.counts[0];
  int mx = grid.counts[0] - 1 - ix;
  int my = grid.dim > 1 ? grid.counts[1] - 1 - iy : 0;
  return mx + grid.counts[0] * my;
}

}  // namespace

BathtubThresholds bathtub_threshold(const Field& phi, double alpha,
                                    const Grid& grid) {
  check_alpha(alpha);
  const int n = static_cast<int>(phi.size());
  std::vector<double> sorted(phi.data(), phi.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double k_real = alpha * grid.total_measure / grid.cell_measure;
  int k = static_cast<int>(std::ceil(k_real - 1e-9));
  k = std::clamp(k, 1, n);
  double c = sorted[k - 1];
  double tol = tie_tol(c);
  int ge = 0, gt = 0;
  for (int i = 0; i < n; ++i) {
    if (phi(i) >= c - tol) ++ge;
    if (phi(i) > c + tol) ++gt;
  }
  return {c, ge * grid.cell_measure / grid.total_measure,
          gt * grid.cell_measure / grid.total_measure};
}

BathtubSolution bathtub_max_relaxed(const Field& phi, double alpha,
                                    const Grid& grid) {
  auto th = bathtub_threshold(phi, alpha, grid);
  const int n = static_cast<int>(phi.size());
  const double tol = tie_tol(th.threshold);

  BathtubSolution sol;
  sol.threshold = th.threshold;
  sol.alpha_upper = th.alpha_upper;
  sol.alpha_lower = th.alpha_lower;
  sol.maximizer = Field::Zero(n);
  sol.tie_mass = (alpha - th.alpha_lower) * grid.total_measure;

  double above_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    if (phi(i) > th.threshold + tol) {
      sol.maximizer(i) = 1.0;
      above_sum += phi(i);
    } else if (std::abs(phi(i) - th.threshold) <= tol) {
      sol.tie_cells.push_back(i);
    }
  }
  if (!sol.tie_cells.empty()) {
    double frac = sol.tie_mass / (grid.cell_measure * sol.tie_cells.size());
    frac = std::clamp(frac, 0.0, 1.0);
    for (int i : sol.tie_cells) sol.maximizer(i) = frac;
  }
  sol.value = grid.cell_measure * above_sum + sol.tie_mass * sol.threshold;
  sol.degenerate =
      static_cast<int>(sol.tie_cells.size()) == n && n > 0;
  return sol;
}

BathtubSolution bathtub_max_binary(const Field& phi, double alpha,
                                   const Grid& grid, TieRule tie_rule) {
  auto th = bathtub_threshold(phi, alpha, grid);
  const int n = static_cast<int>(phi.size());
  const double tol = tie_tol(th.threshold);

  BathtubSolution sol;
  sol.threshold = th.threshold;
  sol.alpha_upper = th.alpha_upper;
  sol.alpha_lower = th.alpha_lower;
  sol.tie_mass = (alpha - th.alpha_lower) * grid.total_measure;

  std::vector<char> in(n, 0);
  int taken = 0;
  for (int i = 0; i < n; ++i) {
    if (phi(i) > th.threshold + tol) {
      in[i] = 1;
      ++taken;
    } else if (std::abs(phi(i) - th.threshold) <= tol) {
      sol.tie_cells.push_back(i);
    }
  }
  double target_mass = alpha * grid.total_measure;
  int k_target = static_cast<int>(std::lround(target_mass / grid.cell_measure));
  k_target = std::clamp(k_target, taken,
                        taken + static_cast<int>(sol.tie_cells.size()));

  std::vector<int> order = sol.tie_cells;
  if (tie_rule == TieRule::symmetric_pairing) {
    // Fill mirror pairs from the domain center outward so that a
    // contiguous tie set yields a connected, symmetric mask.
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      int pa = std::max(a, mirror_cell(a, grid));
      int pb = std::max(b, mirror_cell(b, grid));
      if (pa != pb) return pa < pb;
      return a > b;
    });
  }
  for (int i : order) {
    if (taken >= k_target) break;
    in[i] = 1;
    ++taken;
  }
  sol.maximizer = Field::Zero(n);
  for (int i = 0; i < n; ++i) sol.maximizer(i) = in[i] ? 1.0 : 0.0;
  sol.value = mask_value(phi, in, grid.cell_measure);
  sol.measure_defect =
      std::abs(taken * grid.cell_measure - target_mass);
  sol.degenerate = static_cast<int>(sol.tie_cells.size()) == n && n > 0;
  return sol;
}

bool in_solution_set(const Field& theta, const Field& phi, double alpha,
                     const Grid& grid) {
  DensityClassSpec spec(alpha, ClassTag::Theta_density);
  if (!is_feasible(theta, spec, grid, 1e-8))
    throw feasibility_error("in_solution_set: theta is not a feasible density");
  auto th = bathtub_threshold(phi, alpha, grid);
  const double tol = tie_tol(th.threshold);
  for (int i = 0; i < phi.size(); ++i) {
    if (phi(i) > th.threshold + tol && theta(i) < 1.0 - 1e-10) return false;
    if (phi(i) < th.threshold - tol && theta(i) > 1e-10) return false;
  }
  return true;
}

double bathtub_bruteforce(const Field& phi, double alpha, const Grid& grid) {
  check_alpha(alpha);
  const int n = static_cast<int>(phi.size());
  if (n > 20)
    throw config_error("bathtub_bruteforce: oracle limited to 20 cells");
  // Nearest achievable binary mass, mirroring bathtub_max_binary.
  double target = alpha * grid.total_measure;
  int k = static_cast<int>(std::lround(target / grid.cell_measure));
  k = std::clamp(k, 1, n);

  double best = -std::numeric_limits<double>::infinity();
  // Iterate all k-subsets via Gosper's hack; sums run in ascending order.
  uint32_t subset = (1u << k) - 1u;
  const uint32_t limit = 1u << n;
  while (subset < limit) {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      if (subset & (1u << i)) s += phi(i);
    best = std::max(best, grid.cell_measure * s);
    uint32_t c = subset & (~subset + 1u);
    uint32_t r = subset + c;
    subset = (((r ^ subset) >> 2) / c) | r;
  }
  return best;
}

}  // namespace actloc
