#pragma once

#include "ssimgen/image.hpp"
#include "ssimgen/ssim.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ssimgen {

struct BenchOptions {
  double target_mse = 400.0;
  double tolerance = 0.01;  // relative
  int max_steps = 60;
  WindowSpec spec{8, 1};
  std::uint64_t seed = 0;
};

struct BenchRow {
  DistortionKind kind = DistortionKind::GaussNoise;
  double param = 0.0;
  int steps = 0;
  double mse = 0.0;
  double mean_ssim = 0.0;
  double mean_distance_eq1 = 0.0;
  double mean_distance_eq2 = 0.0;
};

/// Search interval for the distortion parameter; MSE is nondecreasing in
/// the parameter over it.
std::pair<double, double> bench_param_range(DistortionKind kind, double range_l);

/// Bisection on the parameter until |mse - target| <= tolerance * target.
/// Throws InvalidParam if the target is unreachable or not met within
/// max_steps.
BenchRow calibrate(const Image& image, DistortionKind kind, const BenchOptions& opt);

/// One calibrated row per distortion family, in enum order.
std::vector<BenchRow> run_bench(const Image& image, const BenchOptions& opt);

std::string bench_csv(const std::vector<BenchRow>& rows);

}  // namespace ssimgen
