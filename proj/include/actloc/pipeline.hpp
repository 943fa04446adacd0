#pragma once

#include <map>

#include "actloc/config.hpp"

namespace actloc {

// Everything a placement run produces, ready for serialization.
struct PlacementReport {
  RunConfig config;
  Problem problem;

  Gp2Result gp2;                 // populated when p == 2
  RelaxedLocationResult relaxed; // populated when p > 2
  ActuatorExtract actuator;
  MinNormResult mask_result;     // min-norm control on the binary actuator
  MinNormResult theta_result;    // min-norm control on the relaxed density
  NashResidual nash;
  SampleTable samples;

  double value_relation_residual = 0.0;
  bool heuristic_binary = false;  // binary mask extracted without a p=2 certificate
  std::string failed_stage;       // empty on success

  std::map<std::string, double> timings;  // seconds per stage
};

// Runs the full placement pipeline. Exceptions carry a "<stage>: ..."
// prefix; whatever was computed before the failure is left in `report`.
void run_pipeline(const RunConfig& config, PlacementReport& report);

// Serializes report.json plus the field and trajectory CSV files into
// config.output_dir. Timings go to a separate timings.txt.
void write_report(const PlacementReport& report);

// Subcommands sharing the same config format.
MinNormResult run_control(const RunConfig& config, const std::string& mask_path,
                          Field& mask_out);
std::string run_verify(const RunConfig& config, const std::string& dir);

std::string report_json(const PlacementReport& report);

}  // namespace actloc
