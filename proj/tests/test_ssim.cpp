#include "doctest.h"
#include "support.hpp"

#include "ssimgen/ssim.hpp"

#include <cmath>
#include <iostream>

using namespace ssimgen;

namespace {

Block block(std::initializer_list<double> v, double l) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x(i++) = d;
  return {x, l};
}

}  // namespace

TEST_CASE("block statistics use the q-1 normalizer") {
  const auto s = block_stats(block({1, 2, 3}, 255));
  CHECK(s.mu == 2.0);
  CHECK(s.sigma == doctest::Approx(1.0).epsilon(1e-15));
  const auto c = block_stats(block({5, 5, 5, 5}, 255));
  CHECK(c.mu == 5.0);
  CHECK(c.sigma == 0.0);
  CHECK_THROWS_AS(block_stats(block({1}, 255)), Error);
  CHECK(covariance(block({1, 2, 3}, 255), block({3, 2, 1}, 255)) == doctest::Approx(-1.0));
  CHECK(covariance(block({1, 4, 2}, 255), block({1, 4, 2}, 255)) == doctest::Approx(block_stats(block({1, 4, 2}, 255)).variance));
  CHECK(covariance(block({1, 4, 2}, 255), block({7, 7, 7}, 255)) == 0.0);
}

TEST_CASE("ssim components on hand-checked blocks") {
  const auto same = ssim_components(block({5, 5, 5, 5}, 10), block({5, 5, 5, 5}, 10));
  CHECK(same.s1 == 1.0);
  CHECK(same.s2 == 1.0);
  const auto lum = ssim_components(block({5, 5, 5, 5}, 10), block({0, 0, 0, 0}, 10));
  CHECK(lum.s1 == doctest::Approx(3.9984006397441024e-4).epsilon(1e-12));
  CHECK(lum.s2 == 1.0);
  CHECK(lum.ssim() == doctest::Approx(3.9984006397441024e-4).epsilon(1e-12));
  const auto swapped = ssim_components(block({0, 0, 0, 0}, 10), block({5, 5, 5, 5}, 10));
  CHECK(swapped.s1 == lum.s1);
  CHECK(swapped.s2 == lum.s2);
  CHECK_THROWS_AS(ssim_components(block({1, 2}, 10), block({1, 2, 3}, 10)), Error);
}

TEST_CASE("zero-mean SSIM and the first distance") {
  const Block a = block({1, -1}, 1), b = block({-1, 1}, 1), z = block({0, 0}, 1);
  CHECK(ssim_zero_mean(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ssim_zero_mean(a, b) == doctest::Approx(-0.9995501012272239).epsilon(1e-13));
  CHECK(ssim_zero_mean(a, z) == doctest::Approx(4.4979759108e-4).epsilon(1e-9));
  CHECK(dist_eq1(a, a) == 0.0);
  CHECK(dist_eq1(a, b) == doctest::Approx(1.4140544901902556).epsilon(1e-13));
  CHECK(std::abs(1.0 - ssim_zero_mean(a, b) - std::pow(dist_eq1(a, b), 2)) < 1e-10);
}

TEST_CASE("centering policy") {
  const Block off = block({3, 1}, 1), ref = block({1, -1}, 1);
  CHECK(dist_eq1(off, ref, Centering::Auto) == 0.0);
  CHECK_THROWS_AS(dist_eq1(off, ref, Centering::Require), Error);
  CHECK(dist_eq1(ref, ref, Centering::Require) == 0.0);
  CHECK(dist_eq1(off, ref, Centering::None) > 0.0);
}

TEST_CASE("second distance") {
  CHECK(dist_eq2(block({5, 5, 5, 5}, 10), block({5, 5, 5, 5}, 10)) == 0.0);
  CHECK(dist_eq2(block({5, 5, 5, 5}, 10), block({0, 0, 0, 0}, 10)) ==
        doctest::Approx(0.999800059980007).epsilon(1e-12));
}

TEST_CASE("metric identities on 1000 random block pairs") {
  Rng rng = make_rng(2024);
  std::uniform_int_distribution<int> qdist(2, 64);
  for (int t = 0; t < 1000; ++t) {
    const double l = t % 3 == 0 ? 1.0 : 255.0;
    const Eigen::Index q = qdist(rng);
    const Block a{testing::random_block(rng, q, 0, l), l};
    const Block b{testing::random_block(rng, q, 0, l), l};
    CHECK(std::abs(ssim_components(a, a).ssim() - 1.0) <= 1e-12);
    CHECK(std::abs(ssim_zero_mean(a, a) - 1.0) <= 1e-12);
    CHECK(dist_eq1(a, a) <= 1e-12);
    CHECK(dist_eq2(a, a) <= 1e-6);  // sqrt of a ~1e-16 radicand
    const auto s = ssim_components(a, b);
    CHECK(std::abs(s.s1) <= 1 + 1e-12);
    CHECK(std::abs(s.s2) <= 1 + 1e-12);
    CHECK(std::abs(s.ssim()) <= 1 + 1e-12);
    CHECK(std::abs(std::pow(dist_eq1(a, b), 2) + ssim_zero_mean(a, b) - 1.0) <= 1e-10);
    CHECK(dist_eq2(a, b) <= std::sqrt(2.0) * std::sqrt(2.0));
    const auto r = ssim_components(b, a);
    CHECK(r.s1 == s.s1);
    CHECK(r.s2 == s.s2);
    CHECK(ssim_zero_mean(b, a) == ssim_zero_mean(a, b));
    CHECK(dist_eq1(b, a) == dist_eq1(a, b));
    CHECK(dist_eq2(b, a) == dist_eq2(a, b));
  }
}

TEST_CASE("restricted quasi-convexity of the first distance") {
  Rng rng = make_rng(77);
  int violations_outside = 0;
  for (int t = 0; t < 500; ++t) {
    const Eigen::Index q = 16;
    auto centered = [&] {
      Eigen::VectorXd v = testing::random_block(rng, q, -1, 1);
      return Eigen::VectorXd(v.array() - v.mean());
    };
    const Eigen::VectorXd y = centered();
    Eigen::VectorXd a = centered(), b = centered();
    const bool restricted = a.dot(y) >= 0 && b.dot(y) >= 0;
    auto f = [&](double s) { return dist_eq1(Eigen::VectorXd(s * a + (1 - s) * b), y, 1.0, Centering::Require); };
    const double bound = std::max(f(0.0), f(1.0)) + 1e-9;
    for (int k = 1; k <= 9; ++k) {
      const bool ok = f(0.1 * k) <= bound;
      if (restricted) CHECK(ok);
      else if (!ok) ++violations_outside;
    }
  }
  MESSAGE("quasi-convexity violations outside the restricted domain: " << violations_outside);
}

TEST_CASE("window grid and distance maps") {
  const Image a = test_card(32);
  Image b4 = Image::from_values(4, 4, 255, {0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120, 130, 140, 150});
  const auto m = distance_map(b4, b4, WindowSpec{2, 2}, DistanceMode::Eq2);
  CHECK(m.values.rows() == 2);
  CHECK(m.values.cols() == 2);
  CHECK((m.values.array() == 0.0).all());
  CHECK((distance_map(a, a, WindowSpec{8, 3}, DistanceMode::Eq1).values.array() == 0.0).all());
  CHECK_THROWS_AS(window_grid(4, 4, WindowSpec{5, 1}), Error);
  CHECK_THROWS_AS(window_grid(4, 4, WindowSpec{2, 0}), Error);
  CHECK_THROWS_AS(window_grid(4, 4, WindowSpec{1, 1}), Error);
  CHECK(window_grid(10, 7, WindowSpec{3, 2}) == std::pair<Eigen::Index, Eigen::Index>{4, 3});

  const Image bars = synth(SynthKind::BarsStripes, 8, 1, 4)[0];
  const Image noisy = distort(bars, DistortionKind::GaussNoise, 25.0, 1);
  for (auto mode : {DistanceMode::Eq1, DistanceMode::Eq2})
    CHECK((distance_map(bars, noisy, WindowSpec{4, 2}, mode).values.array() > 0.0).all());
  const auto e1 = distance_map(bars, noisy, WindowSpec{4, 2}, DistanceMode::Eq1);
  const auto e1r = distance_map(noisy, bars, WindowSpec{4, 2}, DistanceMode::Eq1);
  CHECK(e1.values == e1r.values);
}

TEST_CASE("extract_window is row-major") {
  const Image img = Image::from_values(3, 2, 255, {1, 2, 3, 4, 5, 6});
  const Eigen::VectorXd w = extract_window(img, 0, 1, 2);
  CHECK(w(0) == 2);
  CHECK(w(1) == 3);
  CHECK(w(2) == 5);
  CHECK(w(3) == 6);
}

TEST_CASE("mean_ssim identity, symmetry and single-window case") {
  const Image a = synth(SynthKind::Blobs, 8, 1, 3)[0];
  const Image b = synth(SynthKind::Blobs, 8, 1, 4)[0];
  CHECK(mean_ssim(a, a, WindowSpec{4, 1}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(mean_ssim(a, b, WindowSpec{4, 1}) == mean_ssim(b, a, WindowSpec{4, 1}));
  const Eigen::VectorXd va = a.pixels.reshaped<Eigen::RowMajor>();
  const Eigen::VectorXd vb = b.pixels.reshaped<Eigen::RowMajor>();
  CHECK(mean_ssim(a, b, WindowSpec{8, 1}) == doctest::Approx(ssim(va, vb, 255.0)).epsilon(1e-14));
  CHECK(fit_window(a, WindowSpec{16, 1}).window == 8);
}
