#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "actloc/csv.hpp"
#include "actloc/pipeline.hpp"

namespace {

// 0 success, 2 config/feasibility, 3 solver, 4 io, 1 anything else.
int classify(const std::exception_ptr& eptr) {
  try {
    std::rethrow_exception(eptr);
  } catch (const actloc::config_error&) {
    return 2;
  } catch (const actloc::feasibility_error&) {
    return 2;
  } catch (const actloc::solver_error&) {
    return 3;
  } catch (const actloc::io_error&) {
    return 4;
  } catch (...) {
    return 1;
  }
}

int run_optimize(const std::string& config_path) {
  actloc::RunConfig config = actloc::load_config(config_path);
  actloc::PlacementReport report;
  std::exception_ptr failure;
  try {
    actloc::run_pipeline(config, report);
  } catch (...) {
    failure = std::current_exception();
  }
  try {
    report.config = config;
    actloc::write_report(report);
  } catch (const actloc::io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (!failure) return 4;
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
    }
    return classify(failure);
  }
  std::cout << actloc::report_json(report);
  return 0;
}

int run_control_cmd(const std::string& config_path, const std::string& mask_path) {
  actloc::RunConfig config = actloc::load_config(config_path);
  actloc::Field mask;
  actloc::MinNormResult result = actloc::run_control(config, mask_path, mask);
  actloc::Grid grid = actloc::build_grid(config.extents, config.counts);

  std::string dir = config.output_dir;
  actloc::write_coeffs_csv(dir + "/zbar.csv", result.zbar);
  for (int node = 0; node < result.control.nodes(); node += config.snapshot_stride) {
    char name[32];
    std::snprintf(name, sizeof(name), "/control_%04d.csv", node);
    actloc::write_field_csv(dir + name, grid, result.control.at(node));
  }
  std::cout << "min_norm " << actloc::format_full(result.min_norm) << "\n"
            << "min_norm_from_control "
            << actloc::format_full(result.min_norm_from_control) << "\n"
            << "terminal_residual "
            << actloc::format_full(result.terminal_residual) << "\n";
  return 0;
}

int run_bathtub_cmd(const std::string& field_path,
                    const std::vector<double>& extents,
                    const std::vector<int>& counts, double alpha,
                    const std::string& tie_rule_name, bool relaxed) {
  actloc::Grid grid = actloc::build_grid(extents, counts);
  actloc::Field phi = actloc::read_field_csv(field_path, grid);
  actloc::TieRule rule = actloc::TieRule::lowest_index;
  if (tie_rule_name == "symmetric_pairing")
    rule = actloc::TieRule::symmetric_pairing;
  else if (tie_rule_name != "lowest_index")
    throw actloc::config_error("tie rule must be lowest_index or symmetric_pairing");

  actloc::BathtubSolution sol =
      relaxed ? actloc::bathtub_max_relaxed(phi, alpha, grid)
              : actloc::bathtub_max_binary(phi, alpha, grid, rule);
  std::cout << "threshold " << actloc::format_full(sol.threshold) << "\n"
            << "value " << actloc::format_full(sol.value) << "\n"
            << "alpha_upper " << actloc::format_full(sol.alpha_upper) << "\n"
            << "alpha_lower " << actloc::format_full(sol.alpha_lower) << "\n"
            << "tie_cells " << sol.tie_cells.size() << "\n"
            << "measure_defect " << actloc::format_full(sol.measure_defect) << "\n"
            << "degenerate " << (sol.degenerate ? "true" : "false") << "\n";
  actloc::write_field_csv(field_path + ".theta.csv", grid, sol.maximizer);
  return 0;
}

int run_verify_cmd(const std::string& config_path, const std::string& dir) {
  actloc::RunConfig config = actloc::load_config(config_path);
  std::cout << actloc::run_verify(config, dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Actuator placement for minimum-norm heat control"};
  app.require_subcommand(1);

  std::string config_path, mask_path, field_path, out_dir;
  std::string tie_rule_name = "lowest_index";
  std::vector<double> extents{1.0};
  std::vector<int> counts{128};
  double alpha = 0.5;
  bool relaxed = false;

  auto* optimize = app.add_subcommand("optimize", "Run the placement pipeline");
  optimize->add_option("config", config_path, "Run configuration file")->required();

  auto* control = app.add_subcommand("control", "Min-norm control for a given actuator");
  control->add_option("config", config_path, "Run configuration file")->required();
  control->add_option("--mask", mask_path, "Actuator field CSV")->required();

  auto* bathtub = app.add_subcommand("bathtub", "Level-set maximizer of a field");
  bathtub->add_option("--field", field_path, "Field CSV")->required();
  bathtub->add_option("--extents", extents, "Domain lengths");
  bathtub->add_option("--counts", counts, "Cells per axis");
  bathtub->add_option("--alpha", alpha, "Mass fraction")->required();
  bathtub->add_option("--tie-rule", tie_rule_name, "lowest_index or symmetric_pairing");
  bathtub->add_flag("--relaxed", relaxed, "Report the relaxed maximizer");

  auto* verify = app.add_subcommand("verify", "Recompute diagnostics from a run directory");
  verify->add_option("config", config_path, "Run configuration file")->required();
  verify->add_option("--dir", out_dir, "Output directory of a finished run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(optimize)) return run_optimize(config_path);
    if (app.got_subcommand(control)) return run_control_cmd(config_path, mask_path);
    if (app.got_subcommand(bathtub))
      return run_bathtub_cmd(field_path, extents, counts, alpha, tie_rule_name, relaxed);
    if (app.got_subcommand(verify)) return run_verify_cmd(config_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify(std::current_exception());
  }
  return 1;
}
