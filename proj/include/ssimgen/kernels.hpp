#pragma once

#include "ssimgen/image.hpp"
#include "ssimgen/ssim.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>

namespace ssimgen {

/// n x n matrix of image-to-image SSIM distances, D(i,j) = ||D'_ij||_F.
struct DistanceMatrix {
  Eigen::MatrixXd entries;
  DistanceMode mode = DistanceMode::Eq1;
  WindowSpec spec;

  Eigen::Index n() const { return entries.rows(); }
};

enum class KernelProvenance { Ssim, Rbf };

std::string_view to_string(KernelProvenance p);

struct KernelMatrix {
  Eigen::MatrixXd entries;
  KernelProvenance provenance = KernelProvenance::Ssim;
  bool psd_fixed = false;
  double clipped_mass = 0.0;  // set by psd_project

  Eigen::Index n() const { return entries.rows(); }
};

/// Eigenvalues sorted descending.
struct Spectrum {
  Eigen::VectorXd eigenvalues;
  double clipped_mass = 0.0;
};

struct SymmetricEigen {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // column k pairs with values(k)
  int sweeps = 0;
};

/// Each unordered pair is evaluated once and mirrored, so the result is
/// exactly symmetric with an exactly zero diagonal.
DistanceMatrix pairwise_distance_matrix(const Dataset& data, WindowSpec spec, DistanceMode mode,
                                        Centering centering = Centering::Auto);

/// Concatenates two datasets (x first). Throws on heterogeneous shapes.
Dataset pool(const Dataset& x, const Dataset& y);

Eigen::MatrixXd centering_matrix(Eigen::Index n);

/// K = -1/2 H D H with H = I - (1/n) 1 1^T. `squared` squares D first
/// (classical MDS convention); the default uses D as given.
KernelMatrix double_center(const DistanceMatrix& d, bool squared = false);
KernelMatrix double_center(const Eigen::MatrixXd& d, bool squared = false);

/// exp(-gamma * ||x_i - x_j||^2) over rows of `points`.
KernelMatrix rbf_kernel(const Eigen::MatrixXd& points, double gamma);
/// RBF on flattened raw pixel values.
KernelMatrix rbf_kernel(const Dataset& data, double gamma);

/// Cyclic Jacobi rotations until the largest off-diagonal entry falls below
/// 1e-10 (relative to max(1, ||K||_F)); NoConvergence after 100 sweeps.
SymmetricEigen eigen_sym(const Eigen::MatrixXd& k);
Spectrum spectrum(const KernelMatrix& k);

/// Clips negative eigenvalues to zero and rebuilds the matrix.
KernelMatrix psd_project(const KernelMatrix& k);

double max_asymmetry(const Eigen::MatrixXd& m);

std::string spectrum_to_csv(const Spectrum& s);
Spectrum spectrum_from_csv(std::string_view text);

}  // namespace ssimgen
