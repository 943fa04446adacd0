#include "actloc/config.hpp"

#include "actloc/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace actloc {
namespace {

std::string trim(const std::string& s) {
  auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw config_error("config line " + std::to_string(line) + ": " + what);
}

double parse_double(const std::string& value, int line, const std::string& key) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) fail(line, "trailing characters in value for '" + key + "'");
    return v;
  } catch (const std::logic_error&) {
    fail(line, "expected a number for '" + key + "', got '" + value + "'");
  }
}

long parse_int(const std::string& value, int line, const std::string& key) {
  try {
    std::size_t used = 0;
    long v = std::stol(value, &used);
    if (used != value.size()) fail(line, "trailing characters in value for '" + key + "'");
    return v;
  } catch (const std::logic_error&) {
    fail(line, "expected an integer for '" + key + "', got '" + value + "'");
  }
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  cfg.gp2.dual = cfg.dual;

  bool saw_T = false, saw_alpha = false, saw_y0 = false;
  std::string section;
  std::ostringstream echo;

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    auto hash = s.find('#');
    if (hash != std::string::npos) s.erase(hash);
    s = trim(s);
    if (s.empty()) continue;

    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section != "grid" && section != "problem" && section != "discretization" &&
          section != "solver" && section != "output") {
        fail(line, "unknown section [" + section + "]");
      }
      echo << "[" << section << "]\n";
      continue;
    }

    auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected key=value, got '" + s + "'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(line, "empty key");
    if (value.empty()) fail(line, "empty value for '" + key + "'");
    if (section.empty()) fail(line, "key '" + key + "' before any section header");
    echo << key << " = " << value << "\n";

    if (section == "grid") {
      if (key == "extents") {
        cfg.extents.clear();
        for (const auto& item : split_list(value))
          cfg.extents.push_back(parse_double(item, line, key));
        if (cfg.extents.empty() || cfg.extents.size() > 2)
          fail(line, "extents must list one or two lengths");
      } else if (key == "counts") {
        cfg.counts.clear();
        for (const auto& item : split_list(value))
          cfg.counts.push_back(static_cast<int>(parse_int(item, line, key)));
        if (cfg.counts.empty() || cfg.counts.size() > 2)
          fail(line, "counts must list one or two cell counts");
      } else {
        fail(line, "unknown key '" + key + "' in [grid]");
      }
    } else if (section == "problem") {
      if (key == "T") {
        cfg.T = parse_double(value, line, key);
        saw_T = true;
      } else if (key == "alpha") {
        cfg.alpha = parse_double(value, line, key);
        saw_alpha = true;
      } else if (key == "p") {
        if (value == "inf") {
          cfg.p = std::numeric_limits<double>::infinity();
        } else {
          cfg.p = parse_double(value, line, key);
          if (cfg.p < 2.0) fail(line, "p must be >= 2 or 'inf'");
        }
      } else if (key == "y0") {
        saw_y0 = true;
        if (value.rfind("coeffs:", 0) == 0) {
          cfg.y0_kind = RunConfig::Y0Kind::coeffs;
          cfg.y0_coeffs.clear();
          for (const auto& item : split_list(value.substr(7)))
            cfg.y0_coeffs.push_back(parse_double(item, line, key));
          if (cfg.y0_coeffs.empty()) fail(line, "y0 coefficient list is empty");
        } else if (value.rfind("file:", 0) == 0) {
          cfg.y0_kind = RunConfig::Y0Kind::file;
          cfg.y0_file = trim(value.substr(5));
          if (cfg.y0_file.empty()) fail(line, "y0 file path is empty");
        } else if (value == "mode1" || value == "bump") {
          cfg.y0_kind = RunConfig::Y0Kind::preset;
          cfg.y0_preset = value;
        } else {
          fail(line, "y0 must be mode1, bump, coeffs:..., or file:...");
        }
      } else if (key == "potential") {
        if (value == "none") {
          cfg.potential_kind = RunConfig::PotentialKind::none;
        } else if (value.rfind("constant:", 0) == 0) {
          cfg.potential_kind = RunConfig::PotentialKind::constant;
          cfg.potential_value = parse_double(trim(value.substr(9)), line, key);
        } else if (value.rfind("file:", 0) == 0) {
          cfg.potential_kind = RunConfig::PotentialKind::file;
          cfg.potential_file = trim(value.substr(5));
          if (cfg.potential_file.empty()) fail(line, "potential file path is empty");
        } else {
          fail(line, "potential must be none, constant:..., or file:...");
        }
      } else {
        fail(line, "unknown key '" + key + "' in [problem]");
      }
    } else if (section == "discretization") {
      if (key == "n_t") {
        cfg.n_t = static_cast<int>(parse_int(value, line, key));
      } else if (key == "modes") {
        cfg.modes = static_cast<int>(parse_int(value, line, key));
      } else if (key == "scheme") {
        if (value == "crank_nicolson") cfg.scheme = Scheme::crank_nicolson;
        else if (value == "exact_spectral") cfg.scheme = Scheme::exact_spectral;
        else fail(line, "scheme must be crank_nicolson or exact_spectral");
      } else {
        fail(line, "unknown key '" + key + "' in [discretization]");
      }
    } else if (section == "solver") {
      if (key == "epsilon") {
        cfg.dual.tikhonov = parse_double(value, line, key);
      } else if (key == "delta") {
        cfg.dual.smoothing_delta = parse_double(value, line, key);
      } else if (key == "max_iterations") {
        cfg.dual.max_iterations = static_cast<int>(parse_int(value, line, key));
      } else if (key == "grad_tolerance") {
        cfg.dual.grad_tolerance = parse_double(value, line, key);
      } else if (key == "gp2_max_iterations") {
        cfg.gp2.max_iterations = static_cast<int>(parse_int(value, line, key));
      } else if (key == "gp2_restarts") {
        cfg.gp2.restarts = static_cast<int>(parse_int(value, line, key));
      } else if (key == "step_rule") {
        if (value == "polyak") cfg.gp2.step_rule = GpStepRule::polyak;
        else if (value == "diminishing") cfg.gp2.step_rule = GpStepRule::diminishing;
        else fail(line, "step_rule must be polyak or diminishing");
      } else if (key == "damping") {
        cfg.gp2.damping = parse_double(value, line, key);
      } else if (key == "tie_rule") {
        if (value == "lowest_index") cfg.tie_rule = TieRule::lowest_index;
        else if (value == "symmetric_pairing") cfg.tie_rule = TieRule::symmetric_pairing;
        else fail(line, "tie_rule must be lowest_index or symmetric_pairing");
      } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_int(value, line, key));
      } else if (key == "n_samples") {
        cfg.n_samples = static_cast<int>(parse_int(value, line, key));
      } else if (key == "theta_probes") {
        cfg.theta_probes = static_cast<int>(parse_int(value, line, key));
      } else if (key == "psi_probes") {
        cfg.psi_probes = static_cast<int>(parse_int(value, line, key));
      } else {
        fail(line, "unknown key '" + key + "' in [solver]");
      }
    } else {  // output
      if (key == "directory") {
        cfg.output_dir = value;
      } else if (key == "snapshot_stride") {
        cfg.snapshot_stride = static_cast<int>(parse_int(value, line, key));
      } else {
        fail(line, "unknown key '" + key + "' in [output]");
      }
    }
  }

  if (!saw_T) throw config_error("missing required key T in [problem]");
  if (!saw_alpha) throw config_error("missing required key alpha in [problem]");
  if (!saw_y0) throw config_error("missing required key y0 in [problem]");
  if (!(cfg.T > 0.0)) throw config_error("T must be positive");
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw config_error("alpha must lie in (0,1)");
  if (cfg.extents.size() != cfg.counts.size())
    throw config_error("extents and counts must have matching dimension");
  for (double e : cfg.extents)
    if (!(e > 0.0)) throw config_error("extents must be positive");
  for (int c : cfg.counts)
    if (c <= 0) throw config_error("counts must be positive");
  if (cfg.n_t <= 0) throw config_error("n_t must be positive");
  if (cfg.modes <= 0) throw config_error("modes must be positive");
  if (cfg.n_samples < 0 || cfg.theta_probes < 0 || cfg.psi_probes < 0)
    throw config_error("sample and probe counts must be nonnegative");
  if (cfg.snapshot_stride <= 0) throw config_error("snapshot_stride must be positive");
  cfg.dual.validate(cfg.q());
  cfg.gp2.dual = cfg.dual;
  cfg.gp2.seed = cfg.seed;
  cfg.gp2.validate();

  cfg.echo = echo.str();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

Problem build_problem(const RunConfig& config) {
  Problem problem;
  problem.grid = build_grid(config.extents, config.counts);
  EigenBasis basis = eigenbasis(problem.grid, config.modes);

  PdeParams params;
  params.basis = basis;
  params.T = config.T;
  params.n_t = config.n_t;
  params.scheme = config.scheme;
  switch (config.potential_kind) {
    case RunConfig::PotentialKind::none:
      break;
    case RunConfig::PotentialKind::constant: {
      Field a = Field::Constant(problem.grid.cell_count(), config.potential_value);
      params.a = a;
      break;
    }
    case RunConfig::PotentialKind::file: {
      params.a = read_field_csv(config.potential_file, problem.grid);
      break;
    }
  }
  params.validate();
  problem.params = params;

  const Eigen::Index n = problem.grid.cell_count();
  switch (config.y0_kind) {
    case RunConfig::Y0Kind::preset:
      if (config.y0_preset == "mode1") {
        problem.y0 = problem.params.basis.functions.col(0);
      } else {  // bump: indicator of the middle third, L2-normalized
        Field y = Field::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          bool inside = true;
          double x = problem.grid.x_of(i);
          inside = inside && x > problem.grid.extents[0] / 3.0 &&
                   x < 2.0 * problem.grid.extents[0] / 3.0;
          if (problem.grid.dim == 2) {
            double yy = problem.grid.y_of(i);
            inside = inside && yy > problem.grid.extents[1] / 3.0 &&
                     yy < 2.0 * problem.grid.extents[1] / 3.0;
          }
          if (inside) y(i) = 1.0;
        }
        double nrm = norm_l2(problem.grid, y);
        if (nrm <= 0.0) throw config_error("bump initial datum is empty on this grid");
        problem.y0 = y / nrm;
      }
      break;
    case RunConfig::Y0Kind::coeffs: {
      if (static_cast<Eigen::Index>(config.y0_coeffs.size()) > basis.modes)
        throw config_error("y0 coefficient list longer than the mode count");
      Eigen::VectorXd c = Eigen::VectorXd::Zero(basis.modes);
      for (std::size_t k = 0; k < config.y0_coeffs.size(); ++k)
        c(static_cast<Eigen::Index>(k)) = config.y0_coeffs[k];
      problem.y0 = basis.to_field(c);
      break;
    }
    case RunConfig::Y0Kind::file:
      problem.y0 = read_field_csv(config.y0_file, problem.grid);
      break;
  }
  return problem;
}

}  // namespace actloc
