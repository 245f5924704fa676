#pragma once

#include "ssimgen/kernels.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>

namespace ssimgen {

/// Kernel blocks of a two-sample problem.
struct GramBlocks {
  Eigen::MatrixXd kxx;
  Eigen::MatrixXd kyy;
  Eigen::MatrixXd kxy;
  KernelProvenance provenance = KernelProvenance::Ssim;

  Eigen::Index nx() const { return kxx.rows(); }
  Eigen::Index ny() const { return kyy.rows(); }
};

enum class Estimator { Biased, Unbiased };

struct MmdResult {
  double mmd2 = 0.0;
  Estimator estimator = Estimator::Biased;
  bool clamped = false;  // a raw value in [-1e-10, 0) was reported as 0
  double raw = 0.0;
};

struct PermutationTestResult {
  double observed_mmd2 = 0.0;
  double p_value = 1.0;
  int permutations = 0;
  std::uint64_t seed = 0;
};

/// Blocks of a pooled Gram: the first nx indices are X, the next ny are Y.
GramBlocks slice_blocks(const KernelMatrix& pooled, Eigen::Index nx, Eigen::Index ny);

/// Blocks for an arbitrary relabelling: order[0..nx) is X, the rest is Y.
GramBlocks slice_blocks(const KernelMatrix& pooled, std::span<const Eigen::Index> order, Eigen::Index nx);

/// (1/nx^2) sum Kxx + (1/ny^2) sum Kyy - (2/(nx ny)) sum Kxy.
MmdResult mmd2_biased(const GramBlocks& blocks);

/// U-statistic: diagonals of Kxx and Kyy dropped, n(n-1) denominators.
MmdResult mmd2_unbiased(const GramBlocks& blocks);

/// Permutation test on a fixed pooled Gram. Permutation b shuffles indices
/// with an engine seeded from (seed, b); p = (1 + #{perm >= observed}) / (B + 1).
PermutationTestResult permutation_test(const KernelMatrix& pooled, Eigen::Index nx, Eigen::Index ny,
                                       int permutations, std::uint64_t seed);

std::string mmd_report_header();
std::string mmd_report_row(const PermutationTestResult& r, KernelProvenance kernel, Eigen::Index nx,
                           Eigen::Index ny);

}  // namespace ssimgen
