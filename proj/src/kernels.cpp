#include "ssimgen/kernels.hpp"

#include "ssimgen/io.hpp"
#include "ssimgen/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace ssimgen {

std::string_view to_string(KernelProvenance p) { return p == KernelProvenance::Ssim ? "ssim" : "rbf"; }

DistanceMatrix pairwise_distance_matrix(const Dataset& data, WindowSpec spec, DistanceMode mode,
                                        Centering centering) {
  validate(data);
  const auto n = static_cast<Eigen::Index>(data.size());
  if (n < 2) throw Error(ErrorCode::SampleTooSmall, "distance matrix needs at least 2 images");
  window_grid(data[0].height(), data[0].width(), spec);

  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  pairs.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j) pairs.emplace_back(i, j);

  DistanceMatrix out;
  out.mode = mode;
  out.spec = spec;
  out.entries = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> values(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [i, j] = pairs[k];
    values[k] = distance_map(data[i], data[j], spec, mode, centering).frobenius();
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    out.entries(i, j) = values[k];
    out.entries(j, i) = values[k];
  }
  return out;
}

Dataset pool(const Dataset& x, const Dataset& y) {
  Dataset out;
  out.name = x.name + "+" + y.name;
  out.images = x.images;
  out.images.insert(out.images.end(), y.images.begin(), y.images.end());
  validate(out);
  return out;
}

Eigen::MatrixXd centering_matrix(Eigen::Index n) {
  return Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
}

KernelMatrix double_center(const Eigen::MatrixXd& d, bool squared) {
  if (d.rows() != d.cols() || d.rows() == 0)
    throw Error(ErrorCode::DimensionMismatch, "distance matrix must be square and non-empty");
  if (!d.allFinite()) throw Error(ErrorCode::NonFinite, "distance matrix has non-finite entries");
  if (max_asymmetry(d) > 1e-12 * std::max(1.0, d.cwiseAbs().maxCoeff()))
    throw Error(ErrorCode::NotSymmetric, "distance matrix is not symmetric");
  const Eigen::MatrixXd base = squared ? Eigen::MatrixXd(d.array().square()) : d;
  // -1/2 H D H expanded through row, column and grand means.
  const Eigen::VectorXd row_mean = base.rowwise().mean();
  const Eigen::RowVectorXd col_mean = base.colwise().mean();
  const double grand = base.mean();
  const Eigen::MatrixXd centered =
      -0.5 * (((base.colwise() - row_mean).rowwise() - col_mean).array() + grand).matrix();
  KernelMatrix k;
  k.provenance = KernelProvenance::Ssim;
  k.entries = 0.5 * (centered + centered.transpose());
  return k;
}

KernelMatrix double_center(const DistanceMatrix& d, bool squared) { return double_center(d.entries, squared); }

KernelMatrix rbf_kernel(const Eigen::MatrixXd& points, double gamma) {
  if (!(gamma > 0) || !std::isfinite(gamma)) throw Error(ErrorCode::InvalidParam, "gamma must be positive");
  const Eigen::Index n = points.rows();
  KernelMatrix k;
  k.provenance = KernelProvenance::Rbf;
  k.entries.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k.entries(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-gamma * (points.row(i) - points.row(j)).squaredNorm());
      k.entries(i, j) = v;
      k.entries(j, i) = v;
    }
  }
  return k;
}

KernelMatrix rbf_kernel(const Dataset& data, double gamma) { return rbf_kernel(to_rows(data), gamma); }

double max_asymmetry(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return INFINITY;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

SymmetricEigen eigen_sym(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw Error(ErrorCode::NotSymmetric, "matrix is not square");
  if (!k.allFinite()) throw Error(ErrorCode::NonFinite, "matrix has non-finite entries");
  const double scale = std::max(1.0, k.norm());
  if (k.size() > 0 && max_asymmetry(k) > 1e-10 * scale)
    throw Error(ErrorCode::NotSymmetric, "matrix is not symmetric within 1e-10");

  const Eigen::Index n = k.rows();
  Eigen::MatrixXd a = 0.5 * (k + k.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double tol = 1e-10 * scale;

  auto max_off = [&] {
    double m = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) m = std::max(m, std::abs(a(p, q)));
    return m;
  };

  SymmetricEigen out;
  while (max_off() >= tol) {
    if (out.sweeps == 100) throw Error(ErrorCode::NoConvergence, "Jacobi did not converge in 100 sweeps");
    ++out.sweeps;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J on rows/columns p and q.
        for (Eigen::Index r = 0; r < n; ++r) {
          const double arp = a(r, p), arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (Eigen::Index r = 0; r < n; ++r) {
          const double apr = a(p, r), aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) > a(j, j); });
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k2 = 0; k2 < n; ++k2) {
    out.values(k2) = a(order[k2], order[k2]);
    out.vectors.col(k2) = v.col(order[k2]);
  }
  return out;
}

Spectrum spectrum(const KernelMatrix& k) {
  Spectrum s;
  s.eigenvalues = eigen_sym(k.entries).values;
  s.clipped_mass = k.clipped_mass;
  return s;
}

KernelMatrix psd_project(const KernelMatrix& k) {
  const auto eig = eigen_sym(k.entries);
  const Eigen::VectorXd clipped = eig.values.cwiseMax(0.0);
  KernelMatrix out = k;
  out.clipped_mass = (eig.values - clipped).cwiseAbs().sum();
  const Eigen::MatrixXd rebuilt = eig.vectors * clipped.asDiagonal() * eig.vectors.transpose();
  out.entries = 0.5 * (rebuilt + rebuilt.transpose());
  out.psd_fixed = true;
  return out;
}

std::string spectrum_to_csv(const Spectrum& s) {
  std::string out;
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) out += io::format_double(s.eigenvalues(i)) + "\n";
  out += "# clipped_mass=" + io::format_double(s.clipped_mass) + "\n";
  return out;
}

Spectrum spectrum_from_csv(std::string_view text) {
  Spectrum s;
  std::vector<double> values;
  for (const auto& line : io::split(text, '\n')) {
    std::string_view view(line);
    if (view.empty()) continue;
    constexpr std::string_view footer = "# clipped_mass=";
    if (view.starts_with(footer)) {
      s.clipped_mass = io::parse_double(view.substr(footer.size()));
      continue;
    }
    if (view.front() == '#') continue;
    values.push_back(io::parse_double(view));
  }
  s.eigenvalues = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return s;
}

}  // namespace ssimgen
