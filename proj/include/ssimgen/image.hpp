#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ssimgen {

using PixelMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Grayscale image with intensities in [0, range_l]. Rows are image rows.
struct Image {
  PixelMatrix pixels;
  double range_l = 255.0;

  Eigen::Index width() const { return pixels.cols(); }
  Eigen::Index height() const { return pixels.rows(); }
  Eigen::Index size() const { return pixels.size(); }

  /// Builds and validates an image from row-major values.
  static Image from_values(Eigen::Index width, Eigen::Index height, double range_l,
                           const std::vector<double>& values);
};

/// Throws InvalidParam when the image breaks its invariants.
void validate(const Image& image);

bool same_shape(const Image& a, const Image& b);

struct Dataset {
  std::vector<Image> images;
  std::string name;
  std::optional<std::uint64_t> seed;

  std::size_t size() const { return images.size(); }
  const Image& operator[](std::size_t i) const { return images[i]; }
};

/// Throws when the dataset is empty or its images differ in shape or range.
void validate(const Dataset& data);

/// Stacks the images as rows of an n x (width*height) matrix, each pixel
/// multiplied by `scale`.
Eigen::MatrixXd to_rows(const Dataset& data, double scale = 1.0);

/// Inverse of to_rows: each row becomes an image, values divided by `scale`
/// and clamped to [0, range_l].
Dataset from_rows(const Eigen::MatrixXd& rows, Eigen::Index width, Eigen::Index height,
                  double range_l, double scale, std::string name);

// --- Netpbm / IDX -----------------------------------------------------------

Image load_pgm(const std::filesystem::path& path);
Image parse_pgm(std::string_view bytes);
void save_pgm(const Image& image, const std::filesystem::path& path, bool binary = true);
std::string encode_pgm(const Image& image, bool binary = true);

Dataset load_idx_images(const std::filesystem::path& path);
Dataset parse_idx_images(std::string_view bytes, std::string name = "idx");

/// Loads every *.pgm in a directory in lexicographic filename order.
Dataset load_pgm_dir(const std::filesystem::path& dir);

// --- Synthetic data and distortions ----------------------------------------

enum class SynthKind { BarsStripes, Blobs, UniformNoise };

SynthKind parse_synth_kind(std::string_view name);
std::string_view to_string(SynthKind kind);

/// Deterministic synthetic dataset with range_l = 255.
///  - bars-stripes: each image is either horizontal stripes or vertical bars,
///    every row (resp. column) independently 0 or 255.
///  - blobs: rounded isotropic gaussian bump of width side/4 at a uniformly
///    drawn real-valued center.
///  - uniform-noise: i.i.d. integer pixels uniform on {0, ..., 255}.
Dataset synth(SynthKind kind, int side, int count, std::uint64_t seed);

/// Mid-gray structured test card (smooth bump, coarse bars, fine stripes in
/// the lower half). Intensities stay inside [64, 200].
Image test_card(int side);

enum class DistortionKind { GaussNoise, MeanShift, ContrastScale, BoxBlur, SaltPepper };

DistortionKind parse_distortion_kind(std::string_view name);
std::string_view to_string(DistortionKind kind);

/// Applies a distortion; output clamped to [0, range_l].
///  - gauss-noise: param is sigma >= 0
///  - mean-shift: param is the additive offset
///  - contrast-scale: param gamma > 0 scales deviations from the image mean
///  - box-blur: param alpha in [0, 1] blends toward the 3x3 edge-replicated
///    box blur (alpha = 1 is the plain blur)
///  - salt-pepper: param p in [0, 1] is the per-pixel impulse probability
Image distort(const Image& image, DistortionKind kind, double param, std::uint64_t seed);

double mse(const Image& a, const Image& b);

}  // namespace ssimgen
