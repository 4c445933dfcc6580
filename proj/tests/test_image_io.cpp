#include <doctest.h>

#include <fstream>
#include <iterator>
#include <random>

#include <png.h>

#include "facepipe/image_io.hpp"
#include "facepipe/image_ops.hpp"
#include "support.hpp"

using namespace facepipe;

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Writes a PNG through libpng's simplified API, independent of the library.
void write_raw_png(const std::filesystem::path& p, int w, int h, png_uint_32 format, const void* data) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = w;
  img.height = h;
  img.format = format;
  REQUIRE(png_image_write_to_file(&img, p.c_str(), 0, data, 0, nullptr));
}

}  // namespace

TEST_CASE("an all-zero PNG loads as zeros") {
  test::TempDir dir("png0");
  const std::vector<std::uint8_t> px(2 * 2 * 3, 0);
  write_raw_png(dir / "z.png", 2, 2, PNG_FORMAT_RGB, px.data());
  const ImageBuffer img = load_image(dir / "z.png");
  CHECK(img.width() == 2);
  CHECK(img.height() == 2);
  CHECK(img.channels() == 3);
  for (float v : img.data()) CHECK(v == 0.0f);
}

TEST_CASE("pixel value 128 maps to 128/255 and back") {
  test::TempDir dir("png128");
  const std::vector<std::uint8_t> px(4, 128);
  write_raw_png(dir / "g.png", 2, 2, PNG_FORMAT_GRAY, px.data());
  const ImageBuffer img = load_image(dir / "g.png");
  CHECK(img.channels() == 1);
  CHECK(img.at(1, 1) == 128.0f / 255.0f);
  save_image(img, dir / "g2.png");
  std::vector<std::uint8_t> back(4);
  png_image r{};
  r.version = PNG_IMAGE_VERSION;
  REQUIRE(png_image_begin_read_from_file(&r, (dir / "g2.png").c_str()));
  r.format = PNG_FORMAT_GRAY;
  REQUIRE(png_image_finish_read(&r, nullptr, back.data(), 0, nullptr));
  for (auto v : back) CHECK(v == 128);
}

TEST_CASE("save after load is byte-identical and load is idempotent") {
  test::TempDir dir("pngrt");
  std::mt19937_64 rng(11);
  const ImageBuffer img = test::random_image(17, 9, 3, rng);
  save_image(img, dir / "a.png");
  const ImageBuffer loaded = load_image(dir / "a.png");
  CHECK(test::max_abs_diff(loaded, img) <= 0.5 / 255.0 + 1e-7);
  save_image(loaded, dir / "b.png");
  CHECK(read_bytes(dir / "a.png") == read_bytes(dir / "b.png"));
  CHECK(load_image(dir / "b.png") == loaded);
  CHECK(decode_png(encode_png(loaded)) == loaded);
}

TEST_CASE("unsupported or broken PNGs are rejected") {
  test::TempDir dir("pngbad");
  CHECK_THROWS_AS(load_image(dir / "missing.png"), Error);
  std::ofstream(dir / "junk.png") << "not a png";
  CHECK_THROWS_AS(load_image(dir / "junk.png"), Error);
  const std::vector<std::uint16_t> deep(4, 1000);
  write_raw_png(dir / "deep.png", 2, 2, PNG_FORMAT_LINEAR_Y, deep.data());
  CHECK_THROWS_AS(load_image(dir / "deep.png"), Error);
  const std::vector<std::uint8_t> rgba(16, 200);
  write_raw_png(dir / "alpha.png", 2, 2, PNG_FORMAT_RGBA, rgba.data());
  CHECK_THROWS_AS(load_image(dir / "alpha.png"), Error);
  CHECK_THROWS_AS(save_image(ImageBuffer(1, 1, 1, 2.0f), dir / "over.png"), Error);
}

TEST_CASE("masks persist raw labels") {
  test::TempDir dir("mask");
  SegMask m(4, 3);
  m.set(1, 1, SegLabel::kFace);
  m.set(2, 2, SegLabel::kHair);
  save_mask(m, dir / "m.png");
  CHECK(load_mask(dir / "m.png") == m);
  const std::vector<std::uint8_t> px{0, 1, 2, 7};
  write_raw_png(dir / "bad.png", 2, 2, PNG_FORMAT_GRAY, px.data());
  CHECK_THROWS_AS(load_mask(dir / "bad.png"), Error);
}

TEST_CASE("bilinear sampling hits pixel centers exactly and clamps") {
  ImageBuffer img(2, 1, 1);
  img.at(0, 0) = 0.0f;
  img.at(1, 0) = 1.0f;
  CHECK(sample_bilinear(img, 0.5, 0.5, 0) == 0.0f);
  CHECK(sample_bilinear(img, 1.5, 0.5, 0) == 1.0f);
  CHECK(sample_bilinear(img, 1.0, 0.5, 0) == doctest::Approx(0.5));
  CHECK(sample_bilinear(img, -3.0, 0.5, 0) == 0.0f);
  CHECK(sample_bilinear(img, 9.0, 4.0, 0) == 1.0f);
}

TEST_CASE("horizontal flip is an involution") {
  std::mt19937_64 rng(2);
  const ImageBuffer img = test::random_image(5, 4, 3, rng);
  const ImageBuffer f = flip_horizontal(img);
  CHECK(f.at(0, 2, 1) == img.at(4, 2, 1));
  CHECK(flip_horizontal(f) == img);
}

TEST_CASE("crop coordinates invert and the full-frame crop is the identity") {
  const BoundingBox box{40, 30, 20, 10};
  const Point2 p{35.5, 27.25};
  const Point2 c = to_crop(p, box, 64, 32);
  const Point2 back = from_crop(c, box, 64, 32);
  CHECK(back.x == doctest::Approx(p.x).epsilon(1e-14));
  CHECK(back.y == doctest::Approx(p.y).epsilon(1e-14));
  CHECK(to_crop(Point2{30, 25}, box, 64, 32) == Point2{0, 0});

  std::mt19937_64 rng(4);
  const ImageBuffer img = test::random_image(8, 6, 1, rng);
  const ImageBuffer same = crop_resize(img, BoundingBox{4, 3, 8, 6}, 8, 6);
  CHECK(test::max_abs_diff(same, img) < 1e-6);
}

TEST_CASE("rotation about a point matches the rotation matrix") {
  const Point2 r = rotate_about({10, 5}, {5, 5}, 90.0);
  CHECK(r.x == doctest::Approx(5.0));
  CHECK(r.y == doctest::Approx(10.0));
  std::mt19937_64 rng(5);
  const ImageBuffer img = test::random_image(6, 6, 1, rng);
  CHECK(rotate_about_center(img, 0.0) == img);
}

TEST_CASE("channel conversion replicates or averages") {
  ImageBuffer g(1, 1, 1, 0.25f);
  const ImageBuffer rgb = convert_channels(g, 3);
  CHECK(rgb.channels() == 3);
  for (int c = 0; c < 3; ++c) CHECK(rgb.at(0, 0, c) == 0.25f);
  CHECK(convert_channels(rgb, 1).at(0, 0) == doctest::Approx(0.25f));
}

TEST_CASE("laplacian variance is zero on flat images and larger on noise") {
  CHECK(laplacian_variance(ImageBuffer(8, 8, 1, 0.3f)) == 0.0);
  std::mt19937_64 rng(6);
  const ImageBuffer noisy = test::random_image(16, 16, 1, rng);
  CHECK(laplacian_variance(noisy) > laplacian_variance(test::smooth_image(16, 16, 1, 1)));
}
