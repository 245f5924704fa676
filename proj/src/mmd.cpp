#include "ssimgen/mmd.hpp"

#include "ssimgen/io.hpp"
#include "ssimgen/parallel.hpp"
#include "ssimgen/random.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace ssimgen {

namespace {

constexpr double kClampTolerance = 1e-10;

void check_blocks(const GramBlocks& b) {
  if (b.kxx.rows() != b.kxx.cols() || b.kyy.rows() != b.kyy.cols() || b.kxy.rows() != b.kxx.rows() ||
      b.kxy.cols() != b.kyy.rows())
    throw Error(ErrorCode::DimensionMismatch, "inconsistent Gram block shapes");
  if (b.nx() == 0 || b.ny() == 0) throw Error(ErrorCode::SampleTooSmall, "empty sample");
}

}  // namespace

GramBlocks slice_blocks(const KernelMatrix& pooled, std::span<const Eigen::Index> order, Eigen::Index nx) {
  if (pooled.entries.rows() != pooled.entries.cols() ||
      static_cast<Eigen::Index>(order.size()) != pooled.n())
    throw Error(ErrorCode::DimensionMismatch, "index order does not match pooled Gram");
  if (nx < 1 || nx >= pooled.n()) throw Error(ErrorCode::DimensionMismatch, "bad split size");
  const std::vector<Eigen::Index> xi(order.begin(), order.begin() + nx);
  const std::vector<Eigen::Index> yi(order.begin() + nx, order.end());
  GramBlocks b;
  b.provenance = pooled.provenance;
  b.kxx = pooled.entries(xi, xi);
  b.kyy = pooled.entries(yi, yi);
  b.kxy = pooled.entries(xi, yi);
  return b;
}

GramBlocks slice_blocks(const KernelMatrix& pooled, Eigen::Index nx, Eigen::Index ny) {
  if (nx + ny != pooled.n()) throw Error(ErrorCode::DimensionMismatch, "nx + ny must equal pooled size");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(pooled.n()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  return slice_blocks(pooled, order, nx);
}

MmdResult mmd2_biased(const GramBlocks& b) {
  check_blocks(b);
  const double nx = static_cast<double>(b.nx());
  const double ny = static_cast<double>(b.ny());
  MmdResult r;
  r.estimator = Estimator::Biased;
  r.raw = b.kxx.sum() / (nx * nx) + b.kyy.sum() / (ny * ny) - 2.0 * b.kxy.sum() / (nx * ny);
  r.mmd2 = r.raw;
  if (r.raw < 0.0 && r.raw >= -kClampTolerance) {
    r.mmd2 = 0.0;
    r.clamped = true;
  }
  return r;
}

MmdResult mmd2_unbiased(const GramBlocks& b) {
  check_blocks(b);
  if (b.nx() < 2 || b.ny() < 2) throw Error(ErrorCode::SampleTooSmall, "unbiased MMD needs n >= 2 per sample");
  const double nx = static_cast<double>(b.nx());
  const double ny = static_cast<double>(b.ny());
  MmdResult r;
  r.estimator = Estimator::Unbiased;
  r.raw = (b.kxx.sum() - b.kxx.trace()) / (nx * (nx - 1)) + (b.kyy.sum() - b.kyy.trace()) / (ny * (ny - 1)) -
          2.0 * b.kxy.sum() / (nx * ny);
  r.mmd2 = r.raw;
  return r;
}

PermutationTestResult permutation_test(const KernelMatrix& pooled, Eigen::Index nx, Eigen::Index ny,
                                       int permutations, std::uint64_t seed) {
  if (permutations < 19) throw Error(ErrorCode::InvalidParam, "need at least 19 permutations");
  if (nx < 1 || ny < 1 || nx + ny != pooled.n())
    throw Error(ErrorCode::DimensionMismatch, "nx + ny must equal pooled size");

  std::vector<Eigen::Index> identity(static_cast<std::size_t>(pooled.n()));
  std::iota(identity.begin(), identity.end(), Eigen::Index{0});
  const double observed = mmd2_biased(slice_blocks(pooled, identity, nx)).mmd2;

  std::vector<double> permuted(static_cast<std::size_t>(permutations));
  parallel_for(permuted.size(), [&](std::size_t b) {
    Rng rng = make_rng(seed, b);
    std::vector<Eigen::Index> order = identity;
    std::shuffle(order.begin(), order.end(), rng);
    permuted[b] = mmd2_biased(slice_blocks(pooled, order, nx)).mmd2;
  });

  const auto exceed = std::count_if(permuted.begin(), permuted.end(), [&](double v) { return v >= observed; });
  PermutationTestResult r;
  r.observed_mmd2 = observed;
  r.permutations = permutations;
  r.seed = seed;
  r.p_value = static_cast<double>(1 + exceed) / static_cast<double>(permutations + 1);
  return r;
}

std::string mmd_report_header() { return "observed_mmd2,p_value,B,seed,kernel,n_x,n_y\n"; }

std::string mmd_report_row(const PermutationTestResult& r, KernelProvenance kernel, Eigen::Index nx,
                           Eigen::Index ny) {
  return io::format_double(r.observed_mmd2) + "," + io::format_double(r.p_value) + "," +
         std::to_string(r.permutations) + "," + std::to_string(r.seed) + "," + std::string(to_string(kernel)) +
         "," + std::to_string(nx) + "," + std::to_string(ny) + "\n";
}

}  // namespace ssimgen
