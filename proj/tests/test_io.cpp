// Config parsing, CSV serialization, and pipeline reproducibility.

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "actloc/csv.hpp"
#include "actloc/pipeline.hpp"

using namespace actloc;

namespace {

const char* kMinimalConfig =
    "[grid]\n"
    "extents = 1\n"
    "counts = 32\n"
    "[problem]\n"
    "T = 0.05\n"
    "alpha = 0.5\n"
    "y0 = mode1\n";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::filesystem::path temp_dir(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() /
             (std::string("actloc_test_") + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("parse_config: minimal config fills the defaults") {
  RunConfig cfg = parse_config(kMinimalConfig);
  CHECK(cfg.modes == 32);
  CHECK(cfg.n_t == 200);
  CHECK(cfg.p == 2.0);
  CHECK(cfg.q() == 2.0);
  CHECK(cfg.dual.tikhonov == 1e-8);
  CHECK(cfg.dual.smoothing_delta == 1e-6);
  CHECK(cfg.tie_rule == TieRule::lowest_index);
  CHECK(cfg.seed == 0);
  CHECK(cfg.scheme == Scheme::crank_nicolson);
  CHECK(cfg.y0_preset == "mode1");
}

TEST_CASE("parse_config: p = inf selects the q = 1 pipeline") {
  std::string text = std::string(kMinimalConfig) + "p = inf\n";
  RunConfig cfg = parse_config(text);
  CHECK(std::isinf(cfg.p));
  CHECK(cfg.q() == 1.0);
}

TEST_CASE("parse_config: validation failures name the culprit") {
  SUBCASE("alpha outside (0,1)") {
    std::string text =
        "[grid]\nextents = 1\ncounts = 32\n"
        "[problem]\nT = 0.05\nalpha = 1.2\ny0 = mode1\n";
    CHECK_THROWS_WITH_AS(parse_config(text),
                         "alpha must lie in (0,1)", config_error);
  }
  SUBCASE("unknown key carries its line number") {
    std::string text = std::string(kMinimalConfig) + "chickens = 4\n";
    try {
      parse_config(text);
      FAIL("expected a config error");
    } catch (const config_error& e) {
      std::string what = e.what();
      CHECK(what.find("line 8") != std::string::npos);
      CHECK(what.find("chickens") != std::string::npos);
    }
  }
  SUBCASE("unknown section") {
    CHECK_THROWS_AS(parse_config("[turbo]\nx = 1\n"), config_error);
  }
  SUBCASE("missing required keys") {
    CHECK_THROWS_AS(parse_config("[grid]\nextents = 1\ncounts = 8\n"),
                    config_error);
  }
  SUBCASE("key before any section") {
    CHECK_THROWS_AS(parse_config("T = 0.05\n"), config_error);
  }
  SUBCASE("p below 2") {
    std::string text = std::string(kMinimalConfig) + "p = 1.5\n";
    CHECK_THROWS_AS(parse_config(text), config_error);
  }
}

TEST_CASE("parse_config: comments and solver overrides") {
  std::string text =
      "[grid]\nextents = 1\ncounts = 16  # cells\n"
      "[problem]\nT = 0.1\nalpha = 0.25\ny0 = coeffs: 1, 0, -0.5\n"
      "potential = constant: 2.5\n"
      "[solver]\nepsilon = 0\nseed = 42\ntie_rule = symmetric_pairing\n";
  RunConfig cfg = parse_config(text);
  CHECK(cfg.counts[0] == 16);
  CHECK(cfg.y0_kind == RunConfig::Y0Kind::coeffs);
  CHECK(cfg.y0_coeffs.size() == 3);
  CHECK(cfg.y0_coeffs[2] == -0.5);
  CHECK(cfg.potential_kind == RunConfig::PotentialKind::constant);
  CHECK(cfg.potential_value == 2.5);
  CHECK(cfg.dual.tikhonov == 0.0);
  CHECK(cfg.seed == 42);
  CHECK(cfg.tie_rule == TieRule::symmetric_pairing);
}

TEST_CASE("build_problem: presets land on the grid") {
  RunConfig cfg = parse_config(kMinimalConfig);
  Problem prob = build_problem(cfg);
  CHECK(prob.grid.cell_count() == 32);
  CHECK(norm_l2(prob.grid, prob.y0) == doctest::Approx(1.0).epsilon(1e-12));

  std::string bump = std::string(kMinimalConfig);
  bump.replace(bump.find("mode1"), 5, "bump ");
  Problem pb = build_problem(parse_config(bump));
  CHECK(norm_l2(pb.grid, pb.y0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pb.y0(0) == 0.0);  // bump is supported on the middle third
  CHECK(pb.y0(16) > 0.0);
}

TEST_CASE("field csv: full-precision round trip") {
  Grid g = build_grid({1.0}, {7});
  Field f(7);
  f << 1.0 / 3.0, -2.5e-17, 4.0, 0.0, 1e300, -7.125, 0.1;
  auto dir = temp_dir("csv");
  std::string path = (dir / "f.csv").string();
  write_field_csv(path, g, f);

  std::string text = read_file(path);
  CHECK(text.rfind("x,value\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 8);

  Field back = read_field_csv(path, g);
  CHECK((back - f).lpNorm<Eigen::Infinity>() == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("coeffs csv: round trip") {
  Eigen::VectorXd c(4);
  c << 0.1, -0.2, 3.0e-9, 12.0;
  auto dir = temp_dir("coeffs");
  std::string path = (dir / "c.csv").string();
  write_coeffs_csv(path, c);
  Eigen::VectorXd back = read_coeffs_csv(path);
  CHECK((back - c).lpNorm<Eigen::Infinity>() == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("write_text_atomic: overwrites in place, leaves no temp files") {
  auto dir = temp_dir("atomic");
  std::string path = (dir / "report.txt").string();
  write_text_atomic(path, "first\n");
  write_text_atomic(path, "second\n");
  CHECK(read_file(path) == "second\n");
  int entries = 0;
  for ([[maybe_unused]] auto& e : std::filesystem::directory_iterator(dir))
    ++entries;
  CHECK(entries == 1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("format_full: lossless doubles") {
  for (double v : {1.0 / 3.0, 0.1, -2.5e-17, 1e300, 0.0}) {
    CHECK(std::stod(format_full(v)) == v);
  }
}

TEST_CASE("run_pipeline: identical configs give identical artifacts") {
  auto dir1 = temp_dir("det1");
  auto dir2 = temp_dir("det2");
  std::string base =
      "[grid]\nextents = 1\ncounts = 48\n"
      "[problem]\nT = 0.05\nalpha = 0.5\ny0 = mode1\n"
      "[discretization]\nmodes = 8\nn_t = 60\n"
      "[solver]\nseed = 3\nn_samples = 5\ntheta_probes = 10\npsi_probes = 5\n"
      "[output]\ndirectory = " + dir1.string() + "\n";

  // same config end to end; the first run's artifacts are moved aside
  RunConfig cfg = parse_config(base);
  PlacementReport r1, r2;
  run_pipeline(cfg, r1);
  write_report(r1);
  std::filesystem::remove_all(dir2);
  std::filesystem::rename(dir1, dir2);
  run_pipeline(cfg, r2);
  write_report(r2);

  CHECK(r1.failed_stage.empty());
  CHECK(report_json(r1) == report_json(r2));
  for (const char* name : {"omega.csv", "theta.csv", "fbar.csv", "zbar.csv"}) {
    CAPTURE(name);
    CHECK(read_file((dir1 / name).string()) ==
          read_file((dir2 / name).string()));
  }

  // report invariants
  CHECK(r1.nash.r_theta >= -1e-9);
  CHECK(r1.nash.r_psi >= -1e-9);
  CHECK(r1.samples.violations == 0);
  CHECK(std::isfinite(r1.value_relation_residual));

  std::filesystem::remove_all(dir1);
  std::filesystem::remove_all(dir2);
}

TEST_CASE("run_pipeline: zero initial datum is a config error") {
  std::string text =
      "[grid]\nextents = 1\ncounts = 16\n"
      "[problem]\nT = 0.05\nalpha = 0.5\ny0 = coeffs: 0, 0\n"
      "[discretization]\nmodes = 4\nn_t = 20\n";
  RunConfig cfg = parse_config(text);
  PlacementReport report;
  CHECK_THROWS_AS(run_pipeline(cfg, report), config_error);
}

TEST_CASE("run_verify: accepts what optimize wrote") {
  auto dir = temp_dir("verify");
  std::string text =
      "[grid]\nextents = 1\ncounts = 48\n"
      "[problem]\nT = 0.05\nalpha = 0.5\ny0 = mode1\n"
      "[discretization]\nmodes = 8\nn_t = 60\n"
      "[solver]\nseed = 1\nn_samples = 3\ntheta_probes = 10\npsi_probes = 5\n"
      "[output]\ndirectory = " + dir.string() + "\n";
  RunConfig cfg = parse_config(text);
  PlacementReport report;
  run_pipeline(cfg, report);
  write_report(report);

  std::string verdict = run_verify(cfg, dir.string());
  CHECK(verdict.find("\"pass\": true") != std::string::npos);
  std::filesystem::remove_all(dir);
}
