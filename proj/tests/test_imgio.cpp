#include "doctest.h"
#include "support.hpp"

#include "ssimgen/error.hpp"
#include "ssimgen/image.hpp"
#include "ssimgen/io.hpp"

#include <cmath>
#include <string>

using namespace ssimgen;

namespace {

std::string idx_header(std::uint32_t magic, std::uint32_t n, std::uint32_t rows, std::uint32_t cols) {
  std::string out;
  for (std::uint32_t v : {magic, n, rows, cols})
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xFF));
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an ssimgen::Error");
  return ErrorCode::IoFailure;
}

}  // namespace

TEST_CASE("parse_pgm reads a plain P2 image") {
  const Image img = parse_pgm("P2\n2 2\n255\n0 255 128 64");
  CHECK(img.width() == 2);
  CHECK(img.height() == 2);
  CHECK(img.range_l == 255.0);
  CHECK(img.pixels(0, 0) == 0);
  CHECK(img.pixels(0, 1) == 255);
  CHECK(img.pixels(1, 0) == 128);
  CHECK(img.pixels(1, 1) == 64);
}

TEST_CASE("parse_pgm skips comments and honours maxval") {
  const Image img = parse_pgm("P2\n# made by hand\n3 1 # width height\n15\n0 7 15\n");
  CHECK(img.range_l == 15.0);
  CHECK(img.pixels(0, 2) == 15);
}

TEST_CASE("parse_pgm rejects bad input") {
  CHECK(code_of([] { parse_pgm("P7\n2 2\n255\n0 0 0 0"); }) == ErrorCode::MalformedHeader);
  CHECK(code_of([] { parse_pgm("P2\n2 2\n65535\n0 0 0 0"); }) == ErrorCode::UnsupportedMaxval);
  CHECK(code_of([] { parse_pgm("P2\n2 2\n255\n0 0 0"); }) == ErrorCode::TruncatedData);
  CHECK(code_of([] { parse_pgm("P2\n2 1\n10\n0 11"); }) == ErrorCode::MalformedHeader);
  std::string p5 = "P5\n2 2\n255\n";
  p5 += std::string(3, '\x01');
  CHECK(code_of([&] { parse_pgm(p5); }) == ErrorCode::TruncatedData);
}

TEST_CASE("save_pgm and load_pgm round-trip in both encodings") {
  const auto dir = testing::scratch("pgm_roundtrip");
  const Image img = Image::from_values(2, 2, 255, {0, 255, 128, 64});
  for (bool binary : {true, false}) {
    const auto path = dir / (binary ? "b.pgm" : "a.pgm");
    save_pgm(img, path, binary);
    const Image back = load_pgm(path);
    CHECK(back.range_l == img.range_l);
    CHECK(back.pixels == img.pixels);
  }
}

TEST_CASE("load_pgm of save_pgm is identity on random integer images") {
  const auto dir = testing::scratch("pgm_random");
  Rng rng = make_rng(11);
  std::uniform_int_distribution<int> pix(0, 200);
  for (int t = 0; t < 20; ++t) {
    Image img;
    img.range_l = 200;
    img.pixels = PixelMatrix(3 + t % 4, 5 + t % 3);
    for (Eigen::Index k = 0; k < img.pixels.size(); ++k) img.pixels.data()[k] = pix(rng);
    save_pgm(img, dir / "r.pgm", t % 2 == 0);
    CHECK(load_pgm(dir / "r.pgm").pixels == img.pixels);
  }
}

TEST_CASE("save_pgm rounds to nearest and reports unwritable paths") {
  const auto dir = testing::scratch("pgm_round");
  Image img;
  img.pixels = PixelMatrix::Constant(1, 2, 254.6);
  img.pixels(0, 1) = 3.4;
  save_pgm(img, dir / "r.pgm");
  const Image back = load_pgm(dir / "r.pgm");
  CHECK(back.pixels(0, 0) == 255);
  CHECK(back.pixels(0, 1) == 3);
  CHECK(code_of([&] { save_pgm(img, dir / "missing" / "deeper" / "x.pgm"); }) == ErrorCode::IoFailure);
  CHECK(code_of([&] { load_pgm(dir / "absent.pgm"); }) == ErrorCode::IoFailure);
}

TEST_CASE("IDX images parse and reject malformed payloads") {
  std::string bytes = idx_header(0x803, 2, 4, 4);
  for (int i = 0; i < 32; ++i) bytes.push_back(static_cast<char>(i * 8));
  const Dataset d = parse_idx_images(bytes);
  REQUIRE(d.size() == 2);
  CHECK(d[0].width() == 4);
  CHECK(d[0].height() == 4);
  CHECK(d[0].pixels(0, 1) == 8);
  CHECK(d[1].pixels(3, 3) == 31 * 8);

  std::string wrong_magic = idx_header(0x801, 2, 4, 4) + std::string(32, '\0');
  CHECK(code_of([&] { parse_idx_images(wrong_magic); }) == ErrorCode::MalformedHeader);
  std::string short_payload = idx_header(0x803, 2, 4, 4) + std::string(31, '\0');
  CHECK(code_of([&] { parse_idx_images(short_payload); }) == ErrorCode::TruncatedData);
}

TEST_CASE("load_pgm_dir reads files in name order") {
  const auto dir = testing::scratch("pgm_dir");
  save_pgm(Image::from_values(2, 1, 255, {2, 2}), dir / "b.pgm");
  save_pgm(Image::from_values(2, 1, 255, {1, 1}), dir / "a.pgm");
  const Dataset d = load_pgm_dir(dir);
  REQUIRE(d.size() == 2);
  CHECK(d[0].pixels(0, 0) == 1);
  CHECK(d[1].pixels(0, 0) == 2);
  save_pgm(Image::from_values(3, 1, 255, {1, 1, 1}), dir / "c.pgm");
  CHECK_THROWS_AS(load_pgm_dir(dir), Error);
}

TEST_CASE("synth is deterministic and respects its value sets") {
  const Dataset a = synth(SynthKind::BarsStripes, 4, 3, 7);
  const Dataset b = synth(SynthKind::BarsStripes, 4, 3, 7);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].pixels == b[i].pixels);
  for (const auto& img : synth(SynthKind::BarsStripes, 8, 50, 3).images)
    CHECK((img.pixels.array() == 0.0 || img.pixels.array() == 255.0).all());
  for (const auto& img : synth(SynthKind::Blobs, 8, 100, 1).images) {
    CHECK(img.pixels.minCoeff() >= 0.0);
    CHECK(img.pixels.maxCoeff() <= 255.0);
  }
  for (const auto& img : synth(SynthKind::UniformNoise, 6, 10, 1).images)
    CHECK((img.pixels.array() == img.pixels.array().round()).all());
  CHECK(synth(SynthKind::Blobs, 8, 1, 1)[0].pixels != synth(SynthKind::Blobs, 8, 1, 2)[0].pixels);
}

TEST_CASE("distort covers identity, arithmetic and determinism") {
  const Image card = test_card(32);
  CHECK(distort(card, DistortionKind::MeanShift, 0.0, 0).pixels == card.pixels);
  const Image flat = Image::from_values(2, 2, 255, {100, 100, 100, 100});
  CHECK((distort(flat, DistortionKind::MeanShift, 50.0, 0).pixels.array() == 150.0).all());
  CHECK(distort(card, DistortionKind::GaussNoise, 10.0, 3).pixels ==
        distort(card, DistortionKind::GaussNoise, 10.0, 3).pixels);
  for (auto kind : {DistortionKind::GaussNoise, DistortionKind::MeanShift, DistortionKind::ContrastScale,
                    DistortionKind::BoxBlur, DistortionKind::SaltPepper}) {
    const double param = kind == DistortionKind::ContrastScale ? 3.0 : kind == DistortionKind::GaussNoise ? 80.0
                         : kind == DistortionKind::MeanShift   ? 200.0
                                                               : 0.5;
    const Image d = distort(card, kind, param, 5);
    CHECK(d.pixels.minCoeff() >= 0.0);
    CHECK(d.pixels.maxCoeff() <= 255.0);
  }
  CHECK_THROWS_AS(distort(card, DistortionKind::BoxBlur, 1.5, 0), Error);
}

TEST_CASE("mse matches hand values and rejects mismatched sizes") {
  const Image a = Image::from_values(2, 1, 255, {0, 0});
  const Image b = Image::from_values(2, 1, 255, {3, 4});
  CHECK(mse(a, a) == 0.0);
  CHECK(mse(a, b) == doctest::Approx(12.5));
  CHECK(code_of([&] { mse(a, Image::from_values(1, 2, 255, {0, 0})); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("to_rows and from_rows invert each other") {
  const Dataset d = synth(SynthKind::Blobs, 6, 4, 9);
  const Eigen::MatrixXd rows = to_rows(d, 1.0 / 255.0);
  CHECK(rows.rows() == 4);
  CHECK(rows.cols() == 36);
  const Dataset back = from_rows(rows, 6, 6, 255.0, 1.0 / 255.0, "back");
  for (std::size_t i = 0; i < d.size(); ++i) CHECK((back[i].pixels - d[i].pixels).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("matrix CSV round-trips exactly") {
  Rng rng = make_rng(5);
  const Eigen::MatrixXd m = testing::random_matrix(rng, 4, 3, -1e6, 1e6);
  CHECK(io::matrix_from_csv(io::matrix_to_csv(m)) == m);
  CHECK_THROWS_AS(io::matrix_from_csv("1,2\n3\n"), Error);
  CHECK(io::parse_double(io::format_double(0.1 + 0.2)) == 0.1 + 0.2);
}
