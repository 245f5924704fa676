#pragma once

#include "ssimgen/random.hpp"

#include <Eigen/Dense>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

namespace testing {

/// Fresh scratch directory under SSIMGEN_TEST_TMP (or the system temp dir).
inline std::filesystem::path scratch(const std::string& name) {
  const char* root = std::getenv("SSIMGEN_TEST_TMP");
  std::filesystem::path dir = root ? std::filesystem::path(root) : std::filesystem::temp_directory_path() / "ssimgen";
  dir /= name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Eigen::VectorXd random_block(ssimgen::Rng& rng, Eigen::Index q, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(q);
  for (Eigen::Index i = 0; i < q; ++i) v(i) = u(rng);
  return v;
}

inline Eigen::MatrixXd random_matrix(ssimgen::Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace testing
