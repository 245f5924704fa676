#include "doctest.h"
#include "support.hpp"

#include "ssimgen/mmd.hpp"

#include <cmath>
#include <numeric>
#include <vector>

using namespace ssimgen;

namespace {

// Brute-force double sums over explicit index pairs.
double oracle_biased(const GramBlocks& g) {
  const auto nx = g.kxx.rows(), ny = g.kyy.rows();
  double sxx = 0, syy = 0, sxy = 0;
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < nx; ++j) sxx += g.kxx(i, j);
  for (Eigen::Index i = 0; i < ny; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) syy += g.kyy(i, j);
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) sxy += g.kxy(i, j);
  const double fx = static_cast<double>(nx), fy = static_cast<double>(ny);
  return sxx / (fx * fx) + syy / (fy * fy) - 2.0 * sxy / (fx * fy);
}

double oracle_unbiased(const GramBlocks& g) {
  const auto nx = g.kxx.rows(), ny = g.kyy.rows();
  double sxx = 0, syy = 0, sxy = 0;
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < nx; ++j)
      if (i != j) sxx += g.kxx(i, j);
  for (Eigen::Index i = 0; i < ny; ++i)
    for (Eigen::Index j = 0; j < ny; ++j)
      if (i != j) syy += g.kyy(i, j);
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index j = 0; j < ny; ++j) sxy += g.kxy(i, j);
  const double fx = static_cast<double>(nx), fy = static_cast<double>(ny);
  return sxx / (fx * (fx - 1)) + syy / (fy * (fy - 1)) - 2.0 * sxy / (fx * fy);
}

KernelMatrix pooled_rbf(Rng& rng, Eigen::Index n, Eigen::Index dim) {
  return rbf_kernel(testing::random_matrix(rng, n, dim), 0.7);
}

}  // namespace

TEST_CASE("biased estimator on hand values") {
  GramBlocks g;
  g.kxx = Eigen::MatrixXd::Constant(1, 1, 1.0);
  g.kyy = Eigen::MatrixXd::Constant(1, 1, 1.0);
  g.kxy = Eigen::MatrixXd::Constant(1, 1, 0.5);
  CHECK(mmd2_biased(g).mmd2 == 1.0);

  Rng rng = make_rng(1);
  const Eigen::MatrixXd pts = testing::random_matrix(rng, 3, 4);
  Eigen::MatrixXd twice(6, 4);
  twice << pts, pts;
  const auto same = mmd2_biased(slice_blocks(rbf_kernel(twice, 1.0), 3, 3));
  CHECK(std::abs(same.mmd2) <= 1e-12);
}

TEST_CASE("estimators match brute-force double sums on all Grams up to 5x5") {
  Rng rng = make_rng(99);
  for (Eigen::Index n = 2; n <= 5; ++n) {
    for (Eigen::Index nx = 1; nx < n; ++nx) {
      for (int t = 0; t < 10; ++t) {
        const KernelMatrix k = t % 2 ? pooled_rbf(rng, n, 3) : KernelMatrix{[&] {
          const Eigen::MatrixXd a = testing::random_matrix(rng, n, n);
          return Eigen::MatrixXd(0.5 * (a + a.transpose()));
        }(), KernelProvenance::Ssim, false, 0.0};
        const GramBlocks g = slice_blocks(k, nx, n - nx);
        const auto b = mmd2_biased(g);
        CHECK(std::abs(b.raw - oracle_biased(g)) < 1e-12);
        if (nx >= 2 && n - nx >= 2) {
          const auto u = mmd2_unbiased(g);
          CHECK(std::abs(u.mmd2 - oracle_unbiased(g)) < 1e-12);
          CHECK(u.estimator == Estimator::Unbiased);
        }
      }
    }
  }
}

TEST_CASE("unbiased estimator edge cases") {
  Rng rng = make_rng(2);
  // Both samples are the same point twice; with two distinct points the
  // U-statistic of X = Y is k(p1, p2) - 1, not 0.
  const Eigen::MatrixXd pt = testing::random_matrix(rng, 1, 3);
  Eigen::MatrixXd twice(4, 3);
  twice << pt, pt, pt, pt;
  CHECK(std::abs(mmd2_unbiased(slice_blocks(rbf_kernel(twice, 1.0), 2, 2)).mmd2) <= 1e-12);
  const Eigen::MatrixXd pts = testing::random_matrix(rng, 2, 3);
  Eigen::MatrixXd pair(4, 3);
  pair << pts, pts;
  const KernelMatrix kp = rbf_kernel(pair, 1.0);
  CHECK(mmd2_unbiased(slice_blocks(kp, 2, 2)).mmd2 == doctest::Approx(kp.entries(0, 1) - 1.0).epsilon(1e-14));
  CHECK_THROWS_AS(mmd2_unbiased(slice_blocks(rbf_kernel(twice, 1.0), 1, 3)), Error);
}

TEST_CASE("symmetry and slicing consistency") {
  Rng rng = make_rng(3);
  const KernelMatrix k = pooled_rbf(rng, 7, 2);
  const GramBlocks g = slice_blocks(k, 3, 4);
  std::vector<Eigen::Index> order{3, 4, 5, 6, 0, 1, 2};
  const GramBlocks swapped = slice_blocks(k, order, 4);
  CHECK(mmd2_biased(g).raw == doctest::Approx(mmd2_biased(swapped).raw).epsilon(1e-14));

  GramBlocks manual;
  manual.kxx = k.entries.topLeftCorner(3, 3);
  manual.kyy = k.entries.bottomRightCorner(4, 4);
  manual.kxy = k.entries.topRightCorner(3, 4);
  CHECK(mmd2_biased(manual).raw == mmd2_biased(g).raw);
  CHECK_THROWS_AS(slice_blocks(k, 3, 3), Error);
}

TEST_CASE("biased estimator is nonnegative on psd-projected SSIM Grams") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = synth(SynthKind::UniformNoise, 8, 8, seed);
    const KernelMatrix k = psd_project(double_center(pairwise_distance_matrix(d, WindowSpec{4, 4}, DistanceMode::Eq2)));
    for (Eigen::Index nx = 1; nx < 8; ++nx) CHECK(mmd2_biased(slice_blocks(k, nx, 8 - nx)).raw >= -1e-10);
  }
}

TEST_CASE("clamping of tiny negative values") {
  GramBlocks g;
  g.kxx = Eigen::MatrixXd::Constant(1, 1, 1.0);
  g.kyy = Eigen::MatrixXd::Constant(1, 1, 1.0);
  g.kxy = Eigen::MatrixXd::Constant(1, 1, 1.0 + 2.5e-11);
  const auto small = mmd2_biased(g);
  CHECK(small.mmd2 == 0.0);
  CHECK(small.clamped);
  CHECK(small.raw < 0.0);
  g.kxy(0, 0) = 1.5;
  const auto big = mmd2_biased(g);
  CHECK(big.mmd2 == doctest::Approx(-1.0));
  CHECK_FALSE(big.clamped);
}

TEST_CASE("permutation test contract") {
  const Dataset x = synth(SynthKind::Blobs, 8, 6, 5);
  const KernelMatrix same = double_center(pairwise_distance_matrix(pool(x, x), WindowSpec{4, 4}, DistanceMode::Eq1));
  const auto r = permutation_test(same, 6, 6, 99, 7);
  CHECK(r.observed_mmd2 <= 1e-12);
  CHECK(r.p_value > 0.5);

  Rng rng = make_rng(8);
  const KernelMatrix k = pooled_rbf(rng, 12, 3);
  for (int b : {19, 50, 99}) {
    const auto t = permutation_test(k, 6, 6, b, 1);
    CHECK(t.p_value >= 1.0 / (b + 1));
    CHECK(t.p_value <= 1.0);
    CHECK(t.permutations == b);
  }
  const auto a1 = permutation_test(k, 5, 7, 99, 42);
  const auto a2 = permutation_test(k, 5, 7, 99, 42);
  CHECK(a1.p_value == a2.p_value);
  CHECK(a1.observed_mmd2 == a2.observed_mmd2);
  CHECK_THROWS_AS(permutation_test(k, 6, 6, 10, 1), Error);
}

TEST_CASE("power: bars-stripes against blobs") {
  const Dataset x = synth(SynthKind::BarsStripes, 8, 20, 1);
  const Dataset y = synth(SynthKind::Blobs, 8, 20, 2);
  const KernelMatrix k = double_center(pairwise_distance_matrix(pool(x, y), WindowSpec{8, 1}, DistanceMode::Eq1));
  CHECK(permutation_test(k, 20, 20, 99, 0).p_value < 0.05);
}

TEST_CASE("report row layout") {
  PermutationTestResult r{0.25, 0.5, 99, 3};
  CHECK(mmd_report_header() == "observed_mmd2,p_value,B,seed,kernel,n_x,n_y\n");
  CHECK(mmd_report_row(r, KernelProvenance::Ssim, 10, 12) == "0.25,0.5,99,3,ssim,10,12\n");
}
