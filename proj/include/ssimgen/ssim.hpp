#pragma once

#include "ssimgen/error.hpp"
#include "ssimgen/image.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string_view>

namespace ssimgen {

/// Stabilizing constants for intensity range l:
/// c1 = (0.01 l)^2, c2 = (0.03 l)^2, c3 = c2 / 2.
struct SsimConstants {
  double c1;
  double c2;
  double c3;

  static SsimConstants for_range(double range_l) {
    const double c2 = (0.03 * range_l) * (0.03 * range_l);
    return {(0.01 * range_l) * (0.01 * range_l), c2, c2 / 2.0};
  }

  /// Constant of the zero-mean form for blocks of q samples.
  double zero_mean_c(Eigen::Index q) const { return static_cast<double>(q - 1) * c2; }
};

template <typename Scalar>
struct BlockStats {
  Scalar mu;
  Scalar sigma;
  Scalar variance;  // sigma^2, kept unrounded
};

template <typename Scalar>
struct SsimComponents {
  Scalar s1;  // luminance term
  Scalar s2;  // contrast-structure term

  Scalar ssim() const { return s1 * s2; }
};

/// A flattened image patch together with the range of its source image.
struct Block {
  Eigen::VectorXd values;
  double range_l = 255.0;

  Eigen::Index q() const { return values.size(); }
};

/// How the zero-mean SSIM forms treat blocks whose means are not zero.
enum class Centering {
  Auto,     // subtract each block's mean first
  Require,  // throw NonCenteredBlock unless |mean| <= 1e-9 * range_l
  None,     // uncentered approximation: evaluate on raw values
};

/// Tolerance for declaring a block centered.
inline double mean_tolerance(double range_l) { return 1e-9 * range_l; }

template <typename Derived>
BlockStats<typename Derived::Scalar> block_stats(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index q = x.size();
  if (q < 2) throw Error(ErrorCode::BlockTooSmall, "SSIM blocks need at least 2 samples");
  const Scalar mu = x.mean();
  const Scalar var = (x.array() - mu).square().sum() / static_cast<Scalar>(q - 1);
  return {mu, std::sqrt(var), var};
}

/// Sample covariance with the 1/(q-1) normalizer.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar covariance(const Eigen::MatrixBase<DerivedA>& a,
                                     const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "blocks differ in length");
  if (a.size() < 2) throw Error(ErrorCode::BlockTooSmall, "SSIM blocks need at least 2 samples");
  const Scalar ma = a.mean();
  const Scalar mb = b.mean();
  return ((a.array() - ma) * (b.array() - mb)).sum() / static_cast<Scalar>(a.size() - 1);
}

template <typename DerivedA, typename DerivedB>
SsimComponents<typename DerivedA::Scalar> ssim_components(const Eigen::MatrixBase<DerivedA>& a,
                                                          const Eigen::MatrixBase<DerivedB>& b,
                                                          double range_l) {
  using Scalar = typename DerivedA::Scalar;
  const auto k = SsimConstants::for_range(range_l);
  const auto sa = block_stats(a);
  const auto sb = block_stats(b);
  const Scalar cov = covariance(a, b);
  const Scalar s1 = (2 * sa.mu * sb.mu + k.c1) / (sa.mu * sa.mu + sb.mu * sb.mu + k.c1);
  const Scalar s2 = (2 * cov + k.c2) / (sa.variance + sb.variance + k.c2);
  return {s1, s2};
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar ssim(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                               double range_l) {
  return ssim_components(a, b, range_l).ssim();
}

namespace detail {

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> prepare_zero_mean(
    const Eigen::MatrixBase<Derived>& x, double range_l, Centering centering) {
  using Vec = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;
  Vec v = x.reshaped();
  if (centering == Centering::Auto) {
    v.array() -= v.mean();
  } else if (centering == Centering::Require) {
    if (std::abs(v.mean()) > mean_tolerance(range_l))
      throw Error(ErrorCode::NonCenteredBlock, "block mean exceeds tolerance");
  }
  return v;
}

}  // namespace detail

/// (2 a.b + c) / (|a|^2 + |b|^2 + c) with c = (q-1) c2.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar ssim_zero_mean(const Eigen::MatrixBase<DerivedA>& a,
                                         const Eigen::MatrixBase<DerivedB>& b, double range_l,
                                         Centering centering = Centering::Auto) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "blocks differ in length");
  if (a.size() < 2) throw Error(ErrorCode::BlockTooSmall, "SSIM blocks need at least 2 samples");
  const auto x = detail::prepare_zero_mean(a, range_l, centering);
  const auto y = detail::prepare_zero_mean(b, range_l, centering);
  const double c = SsimConstants::for_range(range_l).zero_mean_c(a.size());
  return (2 * x.dot(y) + c) / (x.squaredNorm() + y.squaredNorm() + c);
}

/// Squared zero-mean SSIM distance |a - b|^2 / (|a|^2 + |b|^2 + c).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar dist_eq1_squared(const Eigen::MatrixBase<DerivedA>& a,
                                           const Eigen::MatrixBase<DerivedB>& b, double range_l,
                                           Centering centering = Centering::Auto) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "blocks differ in length");
  if (a.size() < 2) throw Error(ErrorCode::BlockTooSmall, "SSIM blocks need at least 2 samples");
  const auto x = detail::prepare_zero_mean(a, range_l, centering);
  const auto y = detail::prepare_zero_mean(b, range_l, centering);
  const double c = SsimConstants::for_range(range_l).zero_mean_c(a.size());
  return (x - y).squaredNorm() / (x.squaredNorm() + y.squaredNorm() + c);
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar dist_eq1(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                                   double range_l, Centering centering = Centering::Auto) {
  return std::sqrt(dist_eq1_squared(a, b, range_l, centering));
}

/// Drift below zero smaller than this is clamped; anything larger is a bug.
inline constexpr double kRadicandTolerance = 1e-12;

/// sqrt(2 - s1 - s2); needs no centering.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar dist_eq2(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                                   double range_l) {
  const auto s = ssim_components(a, b, range_l);
  const auto radicand = 2 - s.s1 - s.s2;
  if (radicand < -kRadicandTolerance)
    throw Error(ErrorCode::NegativeRadicand, "2 - s1 - s2 is negative beyond tolerance");
  return std::sqrt(std::max<typename DerivedA::Scalar>(radicand, 0));
}

// Block overloads.

inline void check_pair(const Block& a, const Block& b) {
  if (a.q() != b.q()) throw Error(ErrorCode::DimensionMismatch, "blocks differ in length");
  if (a.range_l != b.range_l) throw Error(ErrorCode::DimensionMismatch, "blocks differ in range_l");
}

inline BlockStats<double> block_stats(const Block& b) { return block_stats(b.values); }
inline double covariance(const Block& a, const Block& b) { return covariance(a.values, b.values); }
inline SsimComponents<double> ssim_components(const Block& a, const Block& b) {
  check_pair(a, b);
  return ssim_components(a.values, b.values, a.range_l);
}
inline double ssim_zero_mean(const Block& a, const Block& b, Centering centering = Centering::Auto) {
  check_pair(a, b);
  return ssim_zero_mean(a.values, b.values, a.range_l, centering);
}
inline double dist_eq1(const Block& a, const Block& b, Centering centering = Centering::Auto) {
  check_pair(a, b);
  return dist_eq1(a.values, b.values, a.range_l, centering);
}
inline double dist_eq2(const Block& a, const Block& b) {
  check_pair(a, b);
  return dist_eq2(a.values, b.values, a.range_l);
}

// --- image level ------------------------------------------------------------

enum class DistanceMode { Eq1, Eq2 };

DistanceMode parse_distance_mode(std::string_view name);
std::string_view to_string(DistanceMode mode);

struct WindowSpec {
  Eigen::Index window = 8;
  Eigen::Index stride = 1;
};

/// Per-window SSIM distances between two images.
struct DistanceMap {
  Eigen::MatrixXd values;  // rows x cols grid of window positions
  WindowSpec spec;
  DistanceMode mode = DistanceMode::Eq2;

  double frobenius() const { return values.norm(); }
};

/// Grid size for the given image dimensions; throws WindowTooLarge.
std::pair<Eigen::Index, Eigen::Index> window_grid(Eigen::Index height, Eigen::Index width, WindowSpec spec);

/// Flattened window with its top-left corner at (row, col), row-major.
Eigen::VectorXd extract_window(const Image& image, Eigen::Index row, Eigen::Index col, Eigen::Index window);

/// Eq1 mode centers every patch pair unless `centering` says otherwise.
DistanceMap distance_map(const Image& a, const Image& b, WindowSpec spec, DistanceMode mode,
                         Centering centering = Centering::Auto);

/// Mean of the full SSIM s1*s2 over all window positions.
double mean_ssim(const Image& a, const Image& b, WindowSpec spec = {});

/// Window clipped to the image so the default spec works on small images.
WindowSpec fit_window(const Image& image, WindowSpec spec);

}  // namespace ssimgen
