#include "actloc/csv.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace actloc {

std::string format_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    if (ec) throw io_error("cannot create directory " + target.parent_path().string());
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw io_error("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out) throw io_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw io_error("cannot rename " + tmp.string() + " to " + path);
}

void write_field_csv(const std::string& path, const Grid& grid, const Field& field) {
  if (field.size() != grid.cell_count())
    throw io_error("field size does not match grid for " + path);
  std::ostringstream out;
  out << (grid.dim == 1 ? "x,value\n" : "x,y,value\n");
  for (Eigen::Index i = 0; i < field.size(); ++i) {
    out << format_full(grid.x_of(i)) << ',';
    if (grid.dim == 2) out << format_full(grid.y_of(i)) << ',';
    out << format_full(field(i)) << '\n';
  }
  write_text_atomic(path, out.str());
}

Field read_field_csv(const std::string& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open field file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty field file: " + path);

  Field field(grid.cell_count());
  Eigen::Index row = 0;
  const int cols = grid.dim + 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (row >= grid.cell_count())
      throw io_error(path + ": more rows than grid cells");
    std::stringstream ss(line);
    std::string item;
    double vals[3] = {0, 0, 0};
    int got = 0;
    while (std::getline(ss, item, ',') && got < cols) {
      try {
        vals[got++] = std::stod(item);
      } catch (const std::logic_error&) {
        throw io_error(path + ": bad number '" + item + "'");
      }
    }
    if (got != cols) throw io_error(path + ": expected " + std::to_string(cols) + " columns");
    double xc = grid.x_of(row);
    if (std::abs(vals[0] - xc) > 1e-9 * std::max(1.0, std::abs(xc)))
      throw io_error(path + ": cell centers do not match the grid");
    if (grid.dim == 2) {
      double yc = grid.y_of(row);
      if (std::abs(vals[1] - yc) > 1e-9 * std::max(1.0, std::abs(yc)))
        throw io_error(path + ": cell centers do not match the grid");
    }
    field(row++) = vals[cols - 1];
  }
  if (row != grid.cell_count())
    throw io_error(path + ": fewer rows than grid cells");
  return field;
}

void write_coeffs_csv(const std::string& path, const Eigen::VectorXd& coeffs) {
  std::ostringstream out;
  out << "mode,value\n";
  for (Eigen::Index k = 0; k < coeffs.size(); ++k)
    out << (k + 1) << ',' << format_full(coeffs(k)) << '\n';
  write_text_atomic(path, out.str());
}

Eigen::VectorXd read_coeffs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open coefficient file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw io_error("empty coefficient file: " + path);
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw io_error(path + ": expected mode,value rows");
    try {
      vals.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::logic_error&) {
      throw io_error(path + ": bad number in '" + line + "'");
    }
  }
  Eigen::VectorXd c(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t k = 0; k < vals.size(); ++k) c(static_cast<Eigen::Index>(k)) = vals[k];
  return c;
}

}  // namespace actloc
