#include "ssimgen/ssim.hpp"

#include "ssimgen/parallel.hpp"

namespace ssimgen {

DistanceMode parse_distance_mode(std::string_view name) {
  if (name == "eq1") return DistanceMode::Eq1;
  if (name == "eq2") return DistanceMode::Eq2;
  throw Error(ErrorCode::InvalidParam, "mode must be eq1 or eq2");
}

std::string_view to_string(DistanceMode mode) { return mode == DistanceMode::Eq1 ? "eq1" : "eq2"; }

std::pair<Eigen::Index, Eigen::Index> window_grid(Eigen::Index height, Eigen::Index width, WindowSpec spec) {
  if (spec.stride < 1) throw Error(ErrorCode::InvalidParam, "stride must be >= 1");
  if (spec.window < 2) throw Error(ErrorCode::BlockTooSmall, "window must be >= 2");
  if (spec.window > std::min(height, width))
    throw Error(ErrorCode::WindowTooLarge, "window exceeds image side");
  return {(height - spec.window) / spec.stride + 1, (width - spec.window) / spec.stride + 1};
}

Eigen::VectorXd extract_window(const Image& image, Eigen::Index row, Eigen::Index col, Eigen::Index window) {
  return image.pixels.block(row, col, window, window).reshaped<Eigen::RowMajor>();
}

WindowSpec fit_window(const Image& image, WindowSpec spec) {
  spec.window = std::min({spec.window, image.height(), image.width()});
  return spec;
}

namespace {

void check_images(const Image& a, const Image& b) {
  if (!same_shape(a, b)) throw Error(ErrorCode::DimensionMismatch, "images differ in size");
  if (a.range_l != b.range_l) throw Error(ErrorCode::DimensionMismatch, "images differ in range_l");
}

}  // namespace

DistanceMap distance_map(const Image& a, const Image& b, WindowSpec spec, DistanceMode mode,
                         Centering centering) {
  check_images(a, b);
  const auto [rows, cols] = window_grid(a.height(), a.width(), spec);
  DistanceMap map;
  map.spec = spec;
  map.mode = mode;
  map.values.resize(rows, cols);
  parallel_for(static_cast<std::size_t>(rows * cols), [&](std::size_t k) {
    const Eigen::Index r = static_cast<Eigen::Index>(k) / cols;
    const Eigen::Index c = static_cast<Eigen::Index>(k) % cols;
    const Eigen::VectorXd pa = extract_window(a, r * spec.stride, c * spec.stride, spec.window);
    const Eigen::VectorXd pb = extract_window(b, r * spec.stride, c * spec.stride, spec.window);
    map.values(r, c) = mode == DistanceMode::Eq1 ? dist_eq1(pa, pb, a.range_l, centering)
                                                 : dist_eq2(pa, pb, a.range_l);
  });
  return map;
}

double mean_ssim(const Image& a, const Image& b, WindowSpec spec) {
  check_images(a, b);
  const auto [rows, cols] = window_grid(a.height(), a.width(), spec);
  double total = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::VectorXd pa = extract_window(a, r * spec.stride, c * spec.stride, spec.window);
      const Eigen::VectorXd pb = extract_window(b, r * spec.stride, c * spec.stride, spec.window);
      total += ssim(pa, pb, a.range_l);
    }
  return total / static_cast<double>(rows * cols);
}

}  // namespace ssimgen
