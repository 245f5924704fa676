#include "ssimgen/image.hpp"

#include "ssimgen/error.hpp"
#include "ssimgen/io.hpp"
#include "ssimgen/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>

namespace ssimgen {

Image Image::from_values(Eigen::Index width, Eigen::Index height, double range_l,
                         const std::vector<double>& values) {
  if (width <= 0 || height <= 0)
    throw Error(ErrorCode::InvalidParam, "image dimensions must be positive");
  if (static_cast<Eigen::Index>(values.size()) != width * height)
    throw Error(ErrorCode::DimensionMismatch, "pixel count does not match width*height");
  Image img;
  img.range_l = range_l;
  img.pixels = Eigen::Map<const PixelMatrix>(values.data(), height, width);
  validate(img);
  return img;
}

void validate(const Image& image) {
  if (!(image.range_l > 0.0) || !std::isfinite(image.range_l))
    throw Error(ErrorCode::InvalidParam, "range_l must be positive");
  if (image.pixels.size() == 0) throw Error(ErrorCode::InvalidParam, "empty image");
  if (!image.pixels.allFinite() || image.pixels.minCoeff() < 0.0 ||
      image.pixels.maxCoeff() > image.range_l)
    throw Error(ErrorCode::InvalidParam, "pixel outside [0, range_l]");
}

bool same_shape(const Image& a, const Image& b) {
  return a.width() == b.width() && a.height() == b.height();
}

void validate(const Dataset& data) {
  if (data.images.empty()) throw Error(ErrorCode::InvalidParam, "empty dataset");
  const Image& first = data.images.front();
  for (const auto& img : data.images) {
    if (!same_shape(img, first) || img.range_l != first.range_l)
      throw Error(ErrorCode::DimensionMismatch, "dataset images are not homogeneous");
  }
}

Eigen::MatrixXd to_rows(const Dataset& data, double scale) {
  validate(data);
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  const Eigen::Index p = data.images.front().size();
  Eigen::MatrixXd rows(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    rows.row(i) = Eigen::Map<const Eigen::RowVectorXd>(data.images[i].pixels.data(), p) * scale;
  return rows;
}

Dataset from_rows(const Eigen::MatrixXd& rows, Eigen::Index width, Eigen::Index height,
                  double range_l, double scale, std::string name) {
  if (rows.cols() != width * height)
    throw Error(ErrorCode::DimensionMismatch, "row length does not match image size");
  Dataset out;
  out.name = std::move(name);
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Image img;
    img.range_l = range_l;
    img.pixels.resize(height, width);
    for (Eigen::Index k = 0; k < rows.cols(); ++k)
      img.pixels.data()[k] = std::clamp(rows(i, k) / scale, 0.0, range_l);
    out.images.push_back(std::move(img));
  }
  return out;
}

// --- PGM --------------------------------------------------------------------

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  // Returns -1 on missing or malformed token.
  long long read_uint() {
    skip_space_and_comments();
    long long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1LL << 40)) return -1;
      ++pos_;
      ++digits;
    }
    return digits ? value : -1;
  }

  bool at_end() const { return pos_ >= bytes_.size(); }
  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::string_view bytes() const { return bytes_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Image parse_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5'))
    throw Error(ErrorCode::MalformedHeader, "expected P2 or P5 magic");
  const bool binary = bytes[1] == '5';
  HeaderReader reader(bytes);
  reader.advance(2);
  if (!reader.at_end() && !std::isspace(static_cast<unsigned char>(bytes[2])) && bytes[2] != '#')
    throw Error(ErrorCode::MalformedHeader, "magic must be followed by whitespace");

  const long long width = reader.read_uint();
  const long long height = reader.read_uint();
  if (width <= 0 || height <= 0) throw Error(ErrorCode::MalformedHeader, "bad dimensions");
  const long long maxval = reader.read_uint();
  if (maxval <= 0) throw Error(ErrorCode::MalformedHeader, "bad maxval");
  if (maxval > 255) throw Error(ErrorCode::UnsupportedMaxval, "maxval above 255");

  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<double> values;
  values.reserve(count);
  if (binary) {
    // Exactly one whitespace byte separates the header from the raster.
    if (reader.at_end()) throw Error(ErrorCode::TruncatedData, "missing raster");
    reader.advance(1);
    if (bytes.size() - reader.pos() < count)
      throw Error(ErrorCode::TruncatedData, "raster shorter than width*height");
    for (std::size_t i = 0; i < count; ++i)
      values.push_back(static_cast<unsigned char>(bytes[reader.pos() + i]));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const long long v = reader.read_uint();
      if (v < 0) throw Error(ErrorCode::TruncatedData, "fewer pixels than declared");
      values.push_back(static_cast<double>(v));
    }
  }
  for (double v : values)
    if (v > static_cast<double>(maxval))
      throw Error(ErrorCode::MalformedHeader, "pixel exceeds maxval");
  return Image::from_values(width, height, static_cast<double>(maxval), values);
}

Image load_pgm(const std::filesystem::path& path) { return parse_pgm(io::read_file(path)); }

std::string encode_pgm(const Image& image, bool binary) {
  const long maxval = std::lround(image.range_l);
  if (maxval < 1 || maxval > 255)
    throw Error(ErrorCode::UnsupportedMaxval, "range_l must round into [1, 255]");
  std::string out = binary ? "P5\n" : "P2\n";
  out += std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n";
  out += std::to_string(maxval) + "\n";
  for (Eigen::Index r = 0; r < image.height(); ++r) {
    for (Eigen::Index c = 0; c < image.width(); ++c) {
      const long v = std::clamp<long>(std::lround(image.pixels(r, c)), 0, maxval);
      if (binary) {
        out += static_cast<char>(static_cast<unsigned char>(v));
      } else {
        if (c) out += ' ';
        out += std::to_string(v);
      }
    }
    if (!binary) out += '\n';
  }
  return out;
}

void save_pgm(const Image& image, const std::filesystem::path& path, bool binary) {
  io::write_file_atomic(path, encode_pgm(image, binary));
}

Dataset load_pgm_dir(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + dir.string());
  std::sort(files.begin(), files.end());
  Dataset data;
  data.name = dir.filename().string();
  for (const auto& f : files) data.images.push_back(load_pgm(f));
  validate(data);
  return data;
}

// --- IDX --------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i)
    v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
  return v;
}

}  // namespace

Dataset parse_idx_images(std::string_view bytes, std::string name) {
  if (bytes.size() < 16) throw Error(ErrorCode::MalformedHeader, "IDX header too short");
  if (read_be32(bytes, 0) != 0x00000803u)
    throw Error(ErrorCode::MalformedHeader, "expected unsigned-byte rank-3 IDX magic");
  const std::uint64_t n = read_be32(bytes, 4);
  const std::uint64_t rows = read_be32(bytes, 8);
  const std::uint64_t cols = read_be32(bytes, 12);
  if (n == 0 || rows == 0 || cols == 0) throw Error(ErrorCode::MalformedHeader, "zero dimension");
  const std::uint64_t payload = n * rows * cols;
  if (bytes.size() - 16 < payload) throw Error(ErrorCode::TruncatedData, "IDX payload truncated");
  if (bytes.size() - 16 > payload) throw Error(ErrorCode::MalformedHeader, "trailing IDX bytes");

  Dataset data;
  data.name = std::move(name);
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data() + 16);
  const auto per = static_cast<std::size_t>(rows * cols);
  for (std::uint64_t i = 0; i < n; ++i) {
    Image img;
    img.range_l = 255.0;
    img.pixels.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (std::size_t k = 0; k < per; ++k) img.pixels.data()[k] = raster[i * per + k];
    data.images.push_back(std::move(img));
  }
  return data;
}

Dataset load_idx_images(const std::filesystem::path& path) {
  return parse_idx_images(io::read_file(path), path.filename().string());
}

// --- synthetic data ---------------------------------------------------------

SynthKind parse_synth_kind(std::string_view name) {
  if (name == "bars-stripes") return SynthKind::BarsStripes;
  if (name == "blobs") return SynthKind::Blobs;
  if (name == "uniform-noise") return SynthKind::UniformNoise;
  throw Error(ErrorCode::InvalidParam, "unknown synth kind '" + std::string(name) + "'");
}

std::string_view to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::BarsStripes: return "bars-stripes";
    case SynthKind::Blobs: return "blobs";
    case SynthKind::UniformNoise: return "uniform-noise";
  }
  return "?";
}

Dataset synth(SynthKind kind, int side, int count, std::uint64_t seed) {
  if (side < 2) throw Error(ErrorCode::InvalidParam, "side must be >= 2");
  if (count < 1) throw Error(ErrorCode::InvalidParam, "count must be >= 1");
  constexpr double l = 255.0;
  Rng rng = make_rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> center(0.0, side - 1.0);
  std::uniform_int_distribution<int> level(0, 255);

  Dataset data;
  data.name = std::string(to_string(kind));
  data.seed = seed;
  for (int n = 0; n < count; ++n) {
    Image img;
    img.range_l = l;
    img.pixels.resize(side, side);
    switch (kind) {
      case SynthKind::BarsStripes: {
        const bool stripes = coin(rng);
        for (int k = 0; k < side; ++k) {
          const double v = coin(rng) ? l : 0.0;
          if (stripes)
            img.pixels.row(k).setConstant(v);
          else
            img.pixels.col(k).setConstant(v);
        }
        break;
      }
      case SynthKind::Blobs: {
        const double cy = center(rng);
        const double cx = center(rng);
        const double sigma = side / 4.0;
        for (int r = 0; r < side; ++r)
          for (int c = 0; c < side; ++c) {
            const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
            img.pixels(r, c) = std::clamp(std::round(l * std::exp(-d2 / (2 * sigma * sigma))), 0.0, l);
          }
        break;
      }
      case SynthKind::UniformNoise:
        for (Eigen::Index k = 0; k < img.pixels.size(); ++k) img.pixels.data()[k] = level(rng);
        break;
    }
    data.images.push_back(std::move(img));
  }
  return data;
}

Image test_card(int side) {
  if (side < 2) throw Error(ErrorCode::InvalidParam, "side must be >= 2");
  Image img;
  img.range_l = 255.0;
  img.pixels.resize(side, side);
  const double s = side / 32.0;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double dy = y - 12 * s, dx = x - 20 * s;
      const double bump = std::exp(-(dy * dy + dx * dx) / (2 * (6 * s) * (6 * s)));
      const double coarse = (x / 4) % 2;
      const double fine = (x % 2) * (y >= side / 2.0 ? 1.0 : 0.0);
      img.pixels(y, x) = std::round(64 + 80 * bump + 24 * coarse + 48 * fine);
    }
  return img;
}

// --- distortions ------------------------------------------------------------

DistortionKind parse_distortion_kind(std::string_view name) {
  if (name == "gauss-noise") return DistortionKind::GaussNoise;
  if (name == "mean-shift") return DistortionKind::MeanShift;
  if (name == "contrast-scale") return DistortionKind::ContrastScale;
  if (name == "box-blur") return DistortionKind::BoxBlur;
  if (name == "salt-pepper") return DistortionKind::SaltPepper;
  throw Error(ErrorCode::InvalidParam, "unknown distortion '" + std::string(name) + "'");
}

std::string_view to_string(DistortionKind kind) {
  switch (kind) {
    case DistortionKind::GaussNoise: return "gauss-noise";
    case DistortionKind::MeanShift: return "mean-shift";
    case DistortionKind::ContrastScale: return "contrast-scale";
    case DistortionKind::BoxBlur: return "box-blur";
    case DistortionKind::SaltPepper: return "salt-pepper";
  }
  return "?";
}

namespace {

PixelMatrix box_blur3(const PixelMatrix& in) {
  const Eigen::Index h = in.rows(), w = in.cols();
  PixelMatrix out(h, w);
  for (Eigen::Index r = 0; r < h; ++r)
    for (Eigen::Index c = 0; c < w; ++c) {
      double acc = 0.0;
      for (Eigen::Index dr = -1; dr <= 1; ++dr)
        for (Eigen::Index dc = -1; dc <= 1; ++dc)
          acc += in(std::clamp<Eigen::Index>(r + dr, 0, h - 1), std::clamp<Eigen::Index>(c + dc, 0, w - 1));
      out(r, c) = acc / 9.0;
    }
  return out;
}

}  // namespace

Image distort(const Image& image, DistortionKind kind, double param, std::uint64_t seed) {
  validate(image);
  if (!std::isfinite(param)) throw Error(ErrorCode::InvalidParam, "non-finite distortion parameter");
  Image out = image;
  const double l = image.range_l;
  switch (kind) {
    case DistortionKind::GaussNoise: {
      if (param < 0) throw Error(ErrorCode::InvalidParam, "sigma must be >= 0");
      Rng rng = make_rng(seed);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index k = 0; k < out.pixels.size(); ++k) out.pixels.data()[k] += param * normal(rng);
      break;
    }
    case DistortionKind::MeanShift:
      out.pixels.array() += param;
      break;
    case DistortionKind::ContrastScale: {
      if (!(param > 0)) throw Error(ErrorCode::InvalidParam, "gamma must be > 0");
      const double mean = image.pixels.mean();
      out.pixels = ((image.pixels.array() - mean) * param + mean).matrix();
      break;
    }
    case DistortionKind::BoxBlur:
      if (param < 0 || param > 1) throw Error(ErrorCode::InvalidParam, "blur alpha must lie in [0, 1]");
      out.pixels = (1.0 - param) * image.pixels + param * box_blur3(image.pixels);
      break;
    case DistortionKind::SaltPepper: {
      if (param < 0 || param > 1) throw Error(ErrorCode::InvalidParam, "p must lie in [0, 1]");
      Rng rng = make_rng(seed);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (Eigen::Index k = 0; k < out.pixels.size(); ++k) {
        const double hit = unit(rng);
        const double salt = unit(rng);
        if (hit < param) out.pixels.data()[k] = salt < 0.5 ? 0.0 : l;
      }
      break;
    }
  }
  out.pixels = out.pixels.cwiseMax(0.0).cwiseMin(l);
  return out;
}

double mse(const Image& a, const Image& b) {
  if (!same_shape(a, b)) throw Error(ErrorCode::DimensionMismatch, "mse needs equal image sizes");
  return (a.pixels - b.pixels).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace ssimgen
