#include "ssimgen/bench.hpp"

#include "ssimgen/error.hpp"
#include "ssimgen/io.hpp"

#include <cmath>
#include <sstream>

namespace ssimgen {

std::pair<double, double> bench_param_range(DistortionKind kind, double range_l) {
  switch (kind) {
    case DistortionKind::GaussNoise: return {0.0, 4.0 * range_l};
    case DistortionKind::MeanShift: return {0.0, range_l};
    case DistortionKind::ContrastScale: return {1.0, 64.0};
    case DistortionKind::BoxBlur: return {0.0, 1.0};
    case DistortionKind::SaltPepper: return {0.0, 1.0};
  }
  return {0.0, 1.0};
}

namespace {

BenchRow measure(const Image& image, const Image& distorted, DistortionKind kind, double param, int steps,
                 const BenchOptions& opt) {
  BenchRow row;
  row.kind = kind;
  row.param = param;
  row.steps = steps;
  row.mse = mse(image, distorted);
  row.mean_ssim = mean_ssim(image, distorted, opt.spec);
  row.mean_distance_eq1 = distance_map(image, distorted, opt.spec, DistanceMode::Eq1).values.mean();
  row.mean_distance_eq2 = distance_map(image, distorted, opt.spec, DistanceMode::Eq2).values.mean();
  return row;
}

}  // namespace

BenchRow calibrate(const Image& image, DistortionKind kind, const BenchOptions& opt) {
  if (!(opt.target_mse > 0.0) || !(opt.tolerance > 0.0))
    throw Error(ErrorCode::InvalidParam, "target_mse and tolerance must be positive");
  auto [lo, hi] = bench_param_range(kind, image.range_l);
  const double band = opt.tolerance * opt.target_mse;
  auto at = [&](double p) { return distort(image, kind, p, opt.seed); };

  if (mse(image, at(hi)) < opt.target_mse - band)
    throw Error(ErrorCode::InvalidParam,
                std::string(to_string(kind)) + " cannot reach target MSE " + io::format_double(opt.target_mse));
  for (int step = 1; step <= opt.max_steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    const Image d = at(mid);
    const double m = mse(image, d);
    if (std::abs(m - opt.target_mse) <= band) return measure(image, d, kind, mid, step, opt);
    (m < opt.target_mse ? lo : hi) = mid;
  }
  throw Error(ErrorCode::InvalidParam, std::string(to_string(kind)) + " calibration did not converge in " +
                                           std::to_string(opt.max_steps) + " steps");
}

std::vector<BenchRow> run_bench(const Image& image, const BenchOptions& opt) {
  validate(image);
  std::vector<BenchRow> rows;
  for (auto kind : {DistortionKind::GaussNoise, DistortionKind::MeanShift, DistortionKind::ContrastScale,
                    DistortionKind::BoxBlur, DistortionKind::SaltPepper})
    rows.push_back(calibrate(image, kind, opt));
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "distortion,param,steps,mse,mean_ssim,mean_distance_eq1,mean_distance_eq2\n";
  for (const auto& r : rows)
    out << to_string(r.kind) << ',' << io::format_double(r.param) << ',' << r.steps << ','
        << io::format_double(r.mse) << ',' << io::format_double(r.mean_ssim) << ','
        << io::format_double(r.mean_distance_eq1) << ',' << io::format_double(r.mean_distance_eq2) << '\n';
  return out.str();
}

}  // namespace ssimgen
