#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ssimgen::io {

std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

double parse_double(std::string_view text);

/// Header-less CSV, one matrix row per line.
std::string matrix_to_csv(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_csv(std::string_view text);

std::vector<std::string> split(std::string_view text, char sep);

}  // namespace ssimgen::io
