// Rearrangement (bathtub) maximization against an exhaustive oracle.

#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "actloc/bathtub.hpp"

using namespace actloc;

namespace {

Field make_field(std::initializer_list<double> v) {
  Field f(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) f(i++) = x;
  return f;
}

}  // namespace

TEST_CASE("bathtub_threshold: hand-checkable scan") {
  Grid g = build_grid({1.0}, {4});
  Field phi = make_field({3.0, 1.0, 2.0, 0.0});
  BathtubThresholds th = bathtub_threshold(phi, 0.5, g);
  CHECK(th.threshold == 2.0);
  CHECK(th.alpha_upper == 0.5);
  CHECK(th.alpha_lower == 0.25);
}

TEST_CASE("bathtub_threshold: constant and strictly sorted fields") {
  Grid g = build_grid({1.0}, {4});
  BathtubThresholds th = bathtub_threshold(Field::Constant(4, 2.5), 0.3, g);
  CHECK(th.threshold == 2.5);
  CHECK(th.alpha_upper == 1.0);
  CHECK(th.alpha_lower == 0.0);

  Field dec = make_field({4.0, 3.0, 2.0, 1.0});
  BathtubThresholds t2 = bathtub_threshold(dec, 0.5, g);
  CHECK(t2.threshold == 3.0);
  CHECK(t2.alpha_upper == 0.5);
}

TEST_CASE("bathtub_max_relaxed: distinct values select the top cells") {
  Grid g = build_grid({1.0}, {4});
  BathtubSolution s = bathtub_max_relaxed(make_field({3.0, 1.0, 2.0, 0.0}), 0.5, g);
  CHECK(s.maximizer(0) == 1.0);
  CHECK(s.maximizer(1) == 0.0);
  CHECK(s.maximizer(2) == 1.0);
  CHECK(s.maximizer(3) == 0.0);
  CHECK(s.value == doctest::Approx(1.25).epsilon(1e-14));
  CHECK_FALSE(s.degenerate);
}

TEST_CASE("bathtub_max_relaxed: tied cells share the residual mass") {
  Grid g = build_grid({1.0}, {4});
  BathtubSolution s = bathtub_max_relaxed(make_field({2.0, 1.0, 1.0, 0.0}), 0.5, g);
  CHECK(s.maximizer(0) == 1.0);
  CHECK(s.maximizer(1) == 0.5);
  CHECK(s.maximizer(2) == 0.5);
  CHECK(s.maximizer(3) == 0.0);
  CHECK(s.value == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(s.tie_cells.size() == 2);
  CHECK(s.tie_mass == doctest::Approx(0.25 * 1.0).epsilon(1e-14));
}

TEST_CASE("bathtub_max_relaxed: constant field is degenerate") {
  Grid g = build_grid({1.0}, {8});
  BathtubSolution s = bathtub_max_relaxed(Field::Constant(8, 3.0), 0.25, g);
  CHECK(s.degenerate);
  CHECK(s.value == doctest::Approx(3.0 * 0.25 * g.total_measure).epsilon(1e-14));
  for (int i = 0; i < 8; ++i) CHECK(s.maximizer(i) == doctest::Approx(0.25));
}

TEST_CASE("bathtub_max_binary: tie filling per rule") {
  Grid g = build_grid({1.0}, {4});
  Field phi = make_field({2.0, 1.0, 1.0, 0.0});
  BathtubSolution s = bathtub_max_binary(phi, 0.5, g, TieRule::lowest_index);
  CHECK(s.maximizer(0) == 1.0);
  CHECK(s.maximizer(1) == 1.0);
  CHECK(s.maximizer(2) == 0.0);
  CHECK(s.maximizer(3) == 0.0);
  CHECK(s.value == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(s.measure_defect == 0.0);
}

TEST_CASE("bathtub_max_binary: unreachable mass reports the defect") {
  Grid g = build_grid({1.0}, {4});
  BathtubSolution s =
      bathtub_max_binary(make_field({3.0, 1.0, 2.0, 0.0}), 0.3, g);
  double mass = 0.25 * s.maximizer.sum();
  CHECK(mass == 0.25);
  CHECK(s.measure_defect == doctest::Approx(0.05).epsilon(1e-14));
}

TEST_CASE("bathtub_bruteforce: reference values and scope guard") {
  Grid g = build_grid({1.0}, {4});
  CHECK(bathtub_bruteforce(make_field({3.0, 1.0, 2.0, 0.0}), 0.5, g) ==
        doctest::Approx(1.25).epsilon(1e-14));
  Grid g1 = build_grid({1.0}, {1});
  CHECK(bathtub_bruteforce(Field::Constant(1, 4.0), 0.999, g1) ==
        doctest::Approx(4.0 * g1.cell_measure).epsilon(1e-12));
  Grid big = build_grid({1.0}, {24});
  CHECK_THROWS_AS(bathtub_bruteforce(Field::Zero(24), 0.5, big), config_error);
}

TEST_CASE("binary maximizer matches the exhaustive oracle exactly") {
  Grid g = build_grid({1.0}, {12});
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_int_distribution<int> cells(1, 11);
  for (int trial = 0; trial < 100; ++trial) {
    Field phi(12);
    for (int i = 0; i < 12; ++i) phi(i) = u(rng);
    double alpha = cells(rng) / 12.0;  // achievable binary mass

    double oracle = bathtub_bruteforce(phi, alpha, g);
    BathtubSolution bin = bathtub_max_binary(phi, alpha, g);
    BathtubSolution rel = bathtub_max_relaxed(phi, alpha, g);

    CHECK(bin.value == oracle);  // same sum over the same cells, exact
    CHECK(rel.value >= bin.value - 1e-14);
    CHECK(in_solution_set(bin.maximizer, phi, alpha, g));
    CHECK(in_solution_set(rel.maximizer, phi, alpha, g));
  }
}

TEST_CASE("relaxed maximizer carries the exact mass") {
  Grid g = build_grid({1.0}, {32});
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double alpha : {0.2, 0.5, 0.77}) {
    Field phi(32);
    for (int i = 0; i < 32; ++i) phi(i) = u(rng);
    BathtubSolution s = bathtub_max_relaxed(phi, alpha, g);
    CHECK(g.cell_measure * s.maximizer.sum() ==
          doctest::Approx(alpha * g.total_measure).epsilon(1e-12));
    CHECK(s.alpha_upper >= alpha - 1e-14);
    CHECK(s.alpha_lower <= alpha + 1e-14);
  }
}

TEST_CASE("value is invariant under permutations") {
  Grid g = build_grid({1.0}, {10});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Field phi(10);
  for (int i = 0; i < 10; ++i) phi(i) = u(rng);
  double base = bathtub_max_relaxed(phi, 0.4, g).value;

  std::vector<int> perm(10);
  for (int i = 0; i < 10; ++i) perm[i] = i;
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    Field shuffled(10);
    for (int i = 0; i < 10; ++i) shuffled(i) = phi(perm[i]);
    CHECK(bathtub_max_relaxed(shuffled, 0.4, g).value ==
          doctest::Approx(base).epsilon(1e-13));
  }
}

TEST_CASE("value grows with alpha at marginal rate c_phi") {
  Grid g = build_grid({1.0}, {16});
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  Field phi(16);
  for (int i = 0; i < 16; ++i) phi(i) = u(rng);

  double prev = bathtub_max_relaxed(phi, 0.05, g).value;
  for (double alpha = 0.1; alpha < 1.0; alpha += 0.05) {
    BathtubSolution s = bathtub_max_relaxed(phi, alpha, g);
    CHECK(s.value >= prev - 1e-13);
    // marginal value of extra mass is the threshold
    double da = 0.01;
    double bumped = bathtub_max_relaxed(phi, alpha + da, g).value;
    CHECK((bumped - s.value) / (da * g.total_measure) <= s.threshold + 1e-9);
    prev = s.value;
  }
}

TEST_CASE("in_solution_set: membership and rejections") {
  Grid g = build_grid({1.0}, {4});
  Field phi = make_field({3.0, 1.0, 2.0, 0.0});

  Field uniform = Field::Constant(4, 0.5);
  CHECK_FALSE(in_solution_set(uniform, phi, 0.5, g));

  // every feasible density is optimal against a constant field
  CHECK(in_solution_set(uniform, Field::Constant(4, 1.0), 0.5, g));

  Field infeasible = Field::Constant(4, 0.9);
  CHECK_THROWS_AS(in_solution_set(infeasible, phi, 0.5, g),
                  feasibility_error);
}

TEST_CASE("tie rules differ only inside the tie set") {
  Grid g = build_grid({1.0}, {6});
  Field phi = make_field({1.0, 2.0, 2.0, 2.0, 2.0, 3.0});
  BathtubSolution low = bathtub_max_binary(phi, 0.5, g, TieRule::lowest_index);
  BathtubSolution sym =
      bathtub_max_binary(phi, 0.5, g, TieRule::symmetric_pairing);
  CHECK(low.value == doctest::Approx(sym.value).epsilon(1e-14));
  CHECK(low.maximizer(5) == 1.0);
  CHECK(sym.maximizer(5) == 1.0);
  CHECK(low.maximizer(0) == 0.0);
  CHECK(sym.maximizer(0) == 0.0);
  CHECK(low.maximizer.sum() == sym.maximizer.sum());
}
