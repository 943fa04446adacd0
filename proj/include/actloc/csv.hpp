#pragma once

#include <string>

#include "actloc/grid.hpp"

namespace actloc {

// Cell-centered field as `x[,y],value` rows; 17 significant digits.
void write_field_csv(const std::string& path, const Grid& grid, const Field& field);
Field read_field_csv(const std::string& path, const Grid& grid);

// Mode coefficients as `mode,value` rows.
void write_coeffs_csv(const std::string& path, const Eigen::VectorXd& coeffs);
Eigen::VectorXd read_coeffs_csv(const std::string& path);

// Writes via a temporary file in the same directory, then renames.
void write_text_atomic(const std::string& path, const std::string& content);

std::string format_full(double v);

}  // namespace actloc
