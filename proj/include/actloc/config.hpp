#pragma once

#include <string>

#include "actloc/game.hpp"

namespace actloc {

// Parsed and validated run configuration (sectioned key=value text).
struct RunConfig {
  std::vector<double> extents{1.0};
  std::vector<int> counts{128};

  double T = 0.0;
  double alpha = 0.0;
  double p = 2.0;

  enum class Y0Kind { preset, coeffs, file };
  Y0Kind y0_kind = Y0Kind::preset;
  std::string y0_preset;            // "mode1" | "bump"
  std::vector<double> y0_coeffs;
  std::string y0_file;

  enum class PotentialKind { none, constant, file };
  PotentialKind potential_kind = PotentialKind::none;
  double potential_value = 0.0;
  std::string potential_file;

  int n_t = 200;
  int modes = 32;
  Scheme scheme = Scheme::crank_nicolson;

  DualSolveOptions dual;   // epsilon = 1e-8, delta = 1e-6 defaults
  Gp2Options gp2;
  TieRule tie_rule = TieRule::lowest_index;
  std::uint64_t seed = 0;

  int n_samples = 100;
  int theta_probes = 200;
  int psi_probes = 60;
  int snapshot_stride = 50;
  std::string output_dir = "out";

  std::string echo;  // normalized text for the report body

  double q() const { return conjugate_exponent(p); }
};

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Materialized problem pieces shared by the CLI subcommands.
struct Problem {
  Grid grid;
  PdeParams params;
  Field y0;
};

Problem build_problem(const RunConfig& config);

}  // namespace actloc
