#include "actloc/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "actloc/csv.hpp"

namespace actloc {
namespace {

using ordered_json = nlohmann::ordered_json;

template <typename ExceptionT>
[[noreturn]] void rethrow_staged(const std::string& stage, const ExceptionT& e) {
  throw ExceptionT(stage + ": " + e.what());
}

template <typename Fn>
void run_stage(PlacementReport& report, const std::string& stage, Fn&& fn) {
  auto start = std::chrono::steady_clock::now();
  try {
    fn();
  } catch (const config_error& e) {
    report.failed_stage = stage;
    rethrow_staged(stage, e);
  } catch (const feasibility_error& e) {
    report.failed_stage = stage;
    rethrow_staged(stage, e);
  } catch (const solver_error& e) {
    report.failed_stage = stage;
    rethrow_staged(stage, e);
  } catch (const io_error& e) {
    report.failed_stage = stage;
    rethrow_staged(stage, e);
  }
  std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  report.timings[stage] = elapsed.count();
}

std::string snapshot_name(const char* prefix, int node) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d.csv", prefix, node);
  return buf;
}

}  // namespace

void run_pipeline(const RunConfig& config, PlacementReport& report) {
  report.config = config;
  const double q = config.q();

  run_stage(report, "setup", [&] { report.problem = build_problem(config); });
  const PdeParams& params = report.problem.params;
  const Field& y0 = report.problem.y0;
  const Grid& grid = report.problem.grid;

  if (norm_l2(grid, y0) <= 0.0)
    throw config_error("setup: initial datum is identically zero");

  Field score;  // field whose superlevel sets locate the actuator
  DualCoefficients zbar;
  if (config.p == 2.0) {
    run_stage(report, "gp2", [&] {
      report.gp2 = solve_gp2(y0, config.alpha, q, params, config.gp2);
    });
    score = report.gp2.fbar;
    zbar = report.gp2.zbar;
  } else {
    run_stage(report, "relaxed", [&] {
      report.relaxed =
          solve_relaxed_location(y0, config.alpha, q, params, config.gp2);
    });
    score = report.relaxed.aggregate;
    zbar = report.relaxed.zbar;
    report.heuristic_binary = true;
  }

  run_stage(report, "extract", [&] {
    report.actuator = extract_actuator(score, config.alpha, grid, config.tie_rule);
    report.actuator.theta =
        config.p == 2.0 ? report.gp2.theta : report.relaxed.theta;
  });

  run_stage(report, "min_norm_mask", [&] {
    report.mask_result =
        solve_min_j(report.actuator.mask, q, y0, params, config.dual);
  });
  run_stage(report, "min_norm_theta", [&] {
    Field beta = report.actuator.theta.cwiseSqrt();
    report.theta_result = solve_min_j(beta, q, y0, params, config.dual);
  });

  run_stage(report, "nash", [&] {
    report.nash = nash_residual(report.actuator.theta, zbar, y0, q,
                                config.alpha, params, config.theta_probes,
                                config.psi_probes, config.seed);
  });

  run_stage(report, "samples", [&] {
    report.samples = optimality_sample_test(report.actuator.mask, y0,
                                            config.alpha, config.p, params,
                                            config.n_samples, config.seed);
  });

  double n2 = report.mask_result.min_norm_from_control;
  report.value_relation_residual =
      std::abs(report.mask_result.value_q + 0.5 * n2 * n2) /
      std::max(1.0, n2 * n2);
}

std::string report_json(const PlacementReport& report) {
  ordered_json j;
  j["config"] = report.config.echo;
  j["grid"] = {{"dim", report.problem.grid.dim},
               {"extents", report.config.extents},
               {"counts", report.config.counts}};
  j["discretization"] = {
      {"modes", report.config.modes},
      {"n_t", report.config.n_t},
      {"scheme", report.config.scheme == Scheme::crank_nicolson
                     ? "crank_nicolson"
                     : "exact_spectral"}};
  j["problem"] = {{"T", report.config.T},
                  {"alpha", report.config.alpha},
                  {"p", std::isinf(report.config.p)
                            ? ordered_json("inf")
                            : ordered_json(report.config.p)},
                  {"q", report.config.q()}};

  if (report.config.p == 2.0 && report.gp2.zbar.size() > 0) {
    j["gp2"] = {{"value", report.gp2.value},
                {"lower_bound", report.gp2.lower_bound},
                {"gap", report.gp2.gap},
                {"subgradient_norm", report.gp2.subgradient_norm},
                {"iterations", report.gp2.history.size()}};
  }
  if (report.config.p != 2.0 && report.relaxed.zbar.size() > 0) {
    j["relaxed"] = {{"min_norm", report.relaxed.min_norm},
                    {"outer_iterations", report.relaxed.history.size()}};
  }
  if (report.actuator.mask.size() > 0) {
    j["actuator"] = {{"threshold", report.actuator.binary.threshold},
                     {"alpha_upper", report.actuator.binary.alpha_upper},
                     {"alpha_lower", report.actuator.binary.alpha_lower},
                     {"tie_mass", report.actuator.relaxed.tie_mass},
                     {"measure_defect", report.actuator.binary.measure_defect},
                     {"degenerate_level_set", report.actuator.degenerate_level_set},
                     {"heuristic_binary", report.heuristic_binary}};
  }
  if (report.mask_result.zbar.size() > 0) {
    j["min_norm_mask"] = {
        {"min_norm", report.mask_result.min_norm},
        {"min_norm_from_control", report.mask_result.min_norm_from_control},
        {"value_q", report.mask_result.value_q},
        {"terminal_residual", report.mask_result.terminal_residual},
        {"gramian_min", report.mask_result.gramian_min},
        {"gramian_max", report.mask_result.gramian_max},
        {"iterations", report.mask_result.iterations}};
    j["value_relation_residual"] = report.value_relation_residual;
  }
  if (report.theta_result.zbar.size() > 0) {
    j["min_norm_theta"] = {
        {"min_norm", report.theta_result.min_norm},
        {"min_norm_from_control", report.theta_result.min_norm_from_control},
        {"value_q", report.theta_result.value_q},
        {"terminal_residual", report.theta_result.terminal_residual}};
  }
  if (!report.samples.rows.empty() || report.samples.reference > 0.0) {
    j["nash"] = {{"r_theta", report.nash.r_theta}, {"r_psi", report.nash.r_psi}};
    j["samples"] = {{"count", report.samples.rows.size()},
                    {"violations", report.samples.violations},
                    {"min_gap", report.samples.min_gap},
                    {"reference", report.samples.reference}};
  }
  j["failed_stage"] = report.failed_stage;
  j["seed"] = report.config.seed;
  return j.dump(2) + "\n";
}

void write_report(const PlacementReport& report) {
  namespace fs = std::filesystem;
  const std::string dir = report.config.output_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw io_error("cannot create output directory " + dir);

  const Grid& grid = report.problem.grid;
  write_text_atomic(dir + "/report.json", report_json(report));

  {
    std::ostringstream t;
    for (const auto& [stage, seconds] : report.timings)
      t << stage << ' ' << format_full(seconds) << "\n";
    write_text_atomic(dir + "/timings.txt", t.str());
  }

  if (report.problem.y0.size() > 0)
    write_field_csv(dir + "/y0.csv", grid, report.problem.y0);
  if (report.gp2.fbar.size() > 0)
    write_field_csv(dir + "/fbar.csv", grid, report.gp2.fbar);
  if (report.relaxed.aggregate.size() > 0)
    write_field_csv(dir + "/fbar.csv", grid, report.relaxed.aggregate);
  if (report.actuator.mask.size() > 0) {
    write_field_csv(dir + "/omega.csv", grid, report.actuator.mask);
    write_field_csv(dir + "/theta.csv", grid, report.actuator.theta);
  }
  if (report.mask_result.zbar.size() > 0)
    write_coeffs_csv(dir + "/zbar.csv", report.mask_result.zbar);
  else if (report.gp2.zbar.size() > 0)
    write_coeffs_csv(dir + "/zbar.csv", report.gp2.zbar);

  if (report.mask_result.control.values.size() > 0) {
    const Trajectory& u = report.mask_result.control;
    const Trajectory& zeta = report.mask_result.zeta;
    for (int node = 0; node < u.nodes(); node += report.config.snapshot_stride) {
      write_field_csv(dir + "/" + snapshot_name("control", node), grid, u.at(node));
      write_field_csv(dir + "/" + snapshot_name("adjoint", node), grid, zeta.at(node));
    }
  }
}

MinNormResult run_control(const RunConfig& config, const std::string& mask_path,
                          Field& mask_out) {
  Problem problem = build_problem(config);
  mask_out = read_field_csv(mask_path, problem.grid);
  if ((mask_out.array() < -1e-12).any() || (mask_out.array() > 1.0 + 1e-12).any())
    throw config_error("actuator field values must lie in [0,1]");
  return solve_min_j(mask_out, config.q(), problem.y0, problem.params,
                     config.dual);
}

std::string run_verify(const RunConfig& config, const std::string& dir) {
  Problem problem = build_problem(config);
  const Grid& grid = problem.grid;

  std::ifstream in(dir + "/report.json");
  if (!in) throw io_error("cannot open " + dir + "/report.json");
  ordered_json stored;
  try {
    in >> stored;
  } catch (const nlohmann::json::exception& e) {
    throw io_error(dir + "/report.json: " + e.what());
  }
  if (!stored.contains("min_norm_mask"))
    throw io_error(dir + "/report.json has no min_norm_mask record");
  double reported = stored["min_norm_mask"]["min_norm_from_control"];

  Field omega = read_field_csv(dir + "/omega.csv", grid);
  Field theta = read_field_csv(dir + "/theta.csv", grid);
  Field fbar = read_field_csv(dir + "/fbar.csv", grid);

  MinNormResult repeat =
      solve_min_j(omega, config.q(), problem.y0, problem.params, config.dual);
  double recomputed = repeat.min_norm_from_control;
  bool match =
      std::abs(recomputed - reported) <= 1e-8 * std::max(1.0, reported);
  bool theta_supported = in_solution_set(theta, fbar, config.alpha, grid);
  double n2 = recomputed;
  double relation =
      std::abs(repeat.value_q + 0.5 * n2 * n2) / std::max(1.0, n2 * n2);

  ordered_json out;
  out["min_norm_reported"] = reported;
  out["min_norm_recomputed"] = recomputed;
  out["min_norm_match"] = match;
  out["theta_in_bathtub_solution_set"] = theta_supported;
  out["value_relation_residual"] = relation;
  out["terminal_residual"] = repeat.terminal_residual;
  out["pass"] = match && theta_supported;
  std::string text = out.dump(2) + "\n";
  write_text_atomic(dir + "/verify.json", text);
  return text;
}

}  // namespace actloc
