#include "doctest.h"
#include "support.hpp"

#include "ssimgen/kernels.hpp"
#include "ssimgen/mmd.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace ssimgen;

namespace {

Eigen::MatrixXd random_symmetric(Rng& rng, Eigen::Index n) {
  const Eigen::MatrixXd a = testing::random_matrix(rng, n, n);
  return 0.5 * (a + a.transpose());
}

Dataset noise_images(int n, std::uint64_t seed) { return synth(SynthKind::UniformNoise, 8, n, seed); }

}  // namespace

TEST_CASE("pairwise distance matrix basics") {
  Dataset twins;
  twins.images = {test_card(16), test_card(16)};
  const auto d0 = pairwise_distance_matrix(twins, WindowSpec{4, 4}, DistanceMode::Eq1);
  CHECK(d0.entries == Eigen::MatrixXd::Zero(2, 2));

  const auto d = pairwise_distance_matrix(noise_images(5, 1), WindowSpec{4, 2}, DistanceMode::Eq2);
  CHECK(d.entries == d.entries.transpose());
  CHECK(d.entries.diagonal().isZero(0.0));
  CHECK(d.entries.minCoeff() >= 0.0);

  Dataset one;
  one.images = {test_card(8)};
  CHECK_THROWS_AS(pairwise_distance_matrix(one, WindowSpec{4, 4}, DistanceMode::Eq1), Error);
}

TEST_CASE("single-window entry equals the block distance") {
  // Two 2x2 images forming a single window each, l = 1.
  Dataset d;
  d.images.resize(2);
  d.images[0] = Image::from_values(2, 2, 1.0, {1, 0, 1, 0});
  d.images[1] = Image::from_values(2, 2, 1.0, {0, 1, 0, 1});
  const auto m = pairwise_distance_matrix(d, WindowSpec{2, 1}, DistanceMode::Eq1);
  Eigen::VectorXd a(4), b(4);
  a << 1, 0, 1, 0;
  b << 0, 1, 0, 1;
  CHECK(m.entries(0, 1) == doctest::Approx(dist_eq1(a, b, 1.0)).epsilon(1e-15));
  const double expected = std::sqrt(4.0 / (2.0 + 3 * 0.03 * 0.03));
  CHECK(m.entries(0, 1) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("double centering of hand matrices") {
  Eigen::MatrixXd d(2, 2);
  d << 0, 4, 4, 0;
  const KernelMatrix k = double_center(d);
  Eigen::MatrixXd expected(2, 2);
  expected << 1, -1, -1, 1;
  CHECK((k.entries - expected).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(double_center(Eigen::MatrixXd::Zero(3, 3)).entries.isZero(0.0));
  Eigen::MatrixXd sq(2, 2);
  sq << 0, 2, 2, 0;
  CHECK((double_center(sq, true).entries - expected).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd asym(2, 2);
  asym << 0, 1, 2, 0;
  CHECK_THROWS_AS(double_center(asym), Error);
  CHECK_THROWS_AS(double_center(Eigen::MatrixXd::Zero(2, 3)), Error);
}

TEST_CASE("SSIM kernel invariants on seeded datasets") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const int n = 4 * static_cast<int>(seed);
    const Dataset data = seed % 2 ? noise_images(n, seed) : synth(SynthKind::Blobs, 8, n, seed);
    for (auto mode : {DistanceMode::Eq1, DistanceMode::Eq2}) {
      const KernelMatrix k = double_center(pairwise_distance_matrix(data, WindowSpec{4, 2}, mode));
      const Eigen::MatrixXd h = centering_matrix(n);
      CHECK(k.entries.rowwise().sum().cwiseAbs().maxCoeff() < 1e-8);
      CHECK((k.entries * Eigen::VectorXd::Ones(n)).norm() < 1e-8);
      CHECK((h * k.entries * h - k.entries).cwiseAbs().maxCoeff() < 1e-8);
      CHECK(max_asymmetry(k.entries) == 0.0);
      const KernelMatrix p = psd_project(k);
      CHECK(spectrum(p).eigenvalues.minCoeff() >= -1e-8);
      CHECK(p.psd_fixed);
    }
  }
}

TEST_CASE("rbf kernel") {
  Eigen::MatrixXd pts(3, 2);
  pts << 0, 0, 1, 1, 0, 0;
  const KernelMatrix k = rbf_kernel(pts, 0.5);
  CHECK(k.provenance == KernelProvenance::Rbf);
  CHECK(k.entries.diagonal().isOnes(0.0));
  CHECK(k.entries(0, 2) == 1.0);
  CHECK(k.entries(0, 1) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  CHECK_THROWS_AS(rbf_kernel(pts, 0.0), Error);

  Rng rng = make_rng(3);
  for (int n : {5, 12, 20}) {
    const KernelMatrix g = rbf_kernel(testing::random_matrix(rng, n, 6), 1.0);
    CHECK(spectrum(g).eigenvalues.minCoeff() > 0.0);
  }
}

TEST_CASE("Jacobi eigensolver") {
  Eigen::MatrixXd k(2, 2);
  k << 1, -1, -1, 1;
  const SymmetricEigen e = eigen_sym(k);
  CHECK(e.values(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::abs(e.values(1)) < 1e-14);
  const SymmetricEigen id = eigen_sym(Eigen::MatrixXd::Identity(3, 3));
  CHECK(id.values.isOnes(0.0));

  Rng rng = make_rng(10);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index n = 2 + t % 12;
    const Eigen::MatrixXd a = random_symmetric(rng, n);
    const SymmetricEigen s = eigen_sym(a);
    CHECK(std::abs(s.values.sum() - a.trace()) < 1e-8);
    const Eigen::MatrixXd rec = s.vectors * s.values.asDiagonal() * s.vectors.transpose();
    CHECK((rec - a).norm() / a.norm() < 1e-8);
    CHECK((s.vectors.transpose() * s.vectors - Eigen::MatrixXd::Identity(n, n)).norm() < 1e-10);
    for (Eigen::Index i = 1; i < n; ++i) CHECK(s.values(i - 1) >= s.values(i));
    // Independent oracle.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> oracle(a);
    const Eigen::VectorXd expected = oracle.eigenvalues().reverse();
    CHECK((s.values - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_THROWS_AS(eigen_sym(Eigen::MatrixXd::Zero(2, 3)), Error);
}

TEST_CASE("psd projection") {
  Eigen::MatrixXd psd(2, 2);
  psd << 2, 1, 1, 2;
  KernelMatrix k{psd, KernelProvenance::Ssim, false, 0.0};
  const KernelMatrix p = psd_project(k);
  CHECK((p.entries - psd).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(p.clipped_mass == 0.0);

  KernelMatrix neg{Eigen::Vector2d(1.0, -0.1).asDiagonal(), KernelProvenance::Ssim, false, 0.0};
  const KernelMatrix q = psd_project(neg);
  CHECK(q.entries(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(q.entries(1, 1)) < 1e-14);
  CHECK(q.clipped_mass == doctest::Approx(0.1).epsilon(1e-14));

  Rng rng = make_rng(4);
  for (int t = 0; t < 10; ++t) {
    KernelMatrix r{random_symmetric(rng, 8), KernelProvenance::Ssim, false, 0.0};
    const KernelMatrix c = psd_project(r);
    CHECK(spectrum(c).eigenvalues.minCoeff() >= -1e-8);
    CHECK(max_asymmetry(c.entries) == 0.0);
  }
}

TEST_CASE("spectrum CSV round-trip") {
  Spectrum s;
  s.eigenvalues = Eigen::Vector3d(2.5, 1.0 / 3.0, -1e-17);
  s.clipped_mass = 0.125;
  const Spectrum back = spectrum_from_csv(spectrum_to_csv(s));
  CHECK(back.eigenvalues == s.eigenvalues);
  CHECK(back.clipped_mass == s.clipped_mass);
}

TEST_CASE("universality proxy on distinct random images") {
  for (int n : {6, 12, 20}) {
    const Dataset data = noise_images(n, 100 + static_cast<std::uint64_t>(n));
    const KernelMatrix k = double_center(pairwise_distance_matrix(data, WindowSpec{4, 2}, DistanceMode::Eq1));
    const Spectrum raw = spectrum(k);
    const Spectrum fixed = spectrum(psd_project(k));
    const auto positive = (fixed.eigenvalues.array() > 1e-8).count();
    MESSAGE("n=" << n << " positive eigenvalues after clipping=" << positive << " raw min="
                 << raw.eigenvalues.minCoeff() << " clipped_mass=" << psd_project(k).clipped_mass);
    CHECK(positive == n - 1);

    const KernelMatrix p = psd_project(k);
    const Eigen::Index half = n / 2;
    const auto r = mmd2_biased(slice_blocks(p, half, n - half));
    CHECK(r.mmd2 > 0.0);
  }
}
