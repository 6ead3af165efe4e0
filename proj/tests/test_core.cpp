#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include <png.h>

#include "doctest.h"
#include "gdp/image.hpp"
#include "gdp/image_io.hpp"
#include "gdp/rng.hpp"
#include "test_util.hpp"

using namespace gdp;

TEST_CASE("shape and tensor basics") {
  ImageTensor a(Shape{3, 2, 4}, 0.5f);
  CHECK(a.size() == 24);
  CHECK(a.at(2, 1, 3) == 0.5f);
  a.at(1, 0, 2) = 2.0f;
  CHECK(a[1 * 8 + 2] == 2.0f);
  CHECK_THROWS(ImageTensor(Shape{3, 0, 4}));
  CHECK_THROWS(ImageTensor(Shape{1, 2, 2}, std::vector<float>(3)));
  CHECK_THROWS(a += ImageTensor(Shape{1, 2, 4}));
}

TEST_CASE("reductions accumulate in double") {
  ImageTensor a(Shape{1, 1, 3}, std::vector<float>{1.0f, -2.0f, 3.0f});
  ImageTensor b(Shape{1, 1, 3}, std::vector<float>{0.5f, 0.5f, 0.5f});
  CHECK(dot(a, b) == doctest::Approx(1.0));
  CHECK(sum(a) == doctest::Approx(2.0));
  CHECK(mean_abs(a) == doctest::Approx(2.0));
  CHECK(sum_squares(a) == doctest::Approx(14.0));
  CHECK(mse(a, b) == doctest::Approx((0.25 + 6.25 + 6.25) / 3.0));
  const ImageTensor c = lincomb(2.0, a, -1.0, b);
  CHECK(c[2] == doctest::Approx(5.5));
}

TEST_CASE("gaussian_image is reproducible and standard normal") {
  SeededRng r1(7), r2(7);
  const ImageTensor a = gaussian_image(r1, Shape{1, 4, 4});
  const ImageTensor b = gaussian_image(r2, Shape{1, 4, 4});
  CHECK(a.values() == b.values());

  SeededRng rng(11);
  const ImageTensor big = gaussian_image(rng, Shape{1, 250, 400});
  const double m = mean(big);
  const double v = sum_squares(big) / big.size() - m * m;
  CHECK(m >= -0.02);
  CHECK(m <= 0.02);
  CHECK(v >= 0.97);
  CHECK(v <= 1.03);

  CHECK_THROWS(gaussian_image(rng, Shape{3, 0, 4}));
}

TEST_CASE("split streams are independent of draw order") {
  const SeededRng root(99);
  SeededRng a = root.split(5);
  SeededRng b = root.split(6);
  const double a1 = a.normal();
  (void)b.normal();
  SeededRng a_again = root.split(5);
  CHECK(a_again.normal() == a1);
  CHECK(root.split(5).key() != root.split(6).key());
}

TEST_CASE("below() is unbiased over a small range") {
  SeededRng rng(3);
  std::vector<int> hist(3, 0);
  for (int i = 0; i < 30000; ++i) ++hist[rng.below(3)];
  for (int h : hist) CHECK(std::abs(h - 10000) < 400);
}

TEST_CASE("resize: constants and single pixels") {
  const ImageTensor c(Shape{2, 3, 5}, 0.7f);
  for (const auto& r : {resize_bilinear(c, 7, 2), resize_nearest(c, 1, 9)}) {
    for (float v : r.values()) CHECK(v == doctest::Approx(0.7f));
  }
  const ImageTensor one(Shape{1, 1, 1}, 0.3f);
  const ImageTensor big = resize_bilinear(one, 4, 6);
  for (float v : big.values()) CHECK(v == doctest::Approx(0.3f));
  CHECK_THROWS(resize_bilinear(c, 0, 3));
}

TEST_CASE("bilinear checkerboard 2x2 -> 4x4 matches hand evaluation") {
  // Source centers sit at output coordinates 0.75 and 2.25 (pixel-center
  // convention); interior weights are 1/4, 3/4, borders clamp.
  const ImageTensor cb(Shape{1, 2, 2}, std::vector<float>{0, 1, 1, 0});
  const ImageTensor r = resize_bilinear(cb, 4, 4);
  const double expect[4][4] = {{0, .25, .75, 1}, {.25, .375, .625, .75}, {.75, .625, .375, .25}, {1, .75, .25, 0}};
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) CHECK(r.at(0, y, x) == doctest::Approx(expect[y][x]).epsilon(1e-7));
  }
}

TEST_CASE("nearest resize replicates blocks") {
  const ImageTensor a(Shape{1, 2, 2}, std::vector<float>{1, 2, 3, 4});
  const ImageTensor r = resize_nearest(a, 4, 4);
  CHECK(r.at(0, 0, 0) == 1);
  CHECK(r.at(0, 1, 1) == 1);
  CHECK(r.at(0, 0, 3) == 2);
  CHECK(r.at(0, 3, 0) == 3);
  CHECK(r.at(0, 3, 3) == 4);
}

TEST_CASE("crop bounds") {
  const ImageTensor a(Shape{1, 4, 4});
  CHECK(crop(a, 1, 1, 3, 3).shape() == Shape{1, 3, 3});
  CHECK_THROWS(crop(a, 2, 2, 3, 3));
}

TEST_CASE("public ops keep random inputs finite") {
  SeededRng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const ImageTensor a = gaussian_image(rng, Shape{3, 9, 7});
    const ImageTensor b = gaussian_image(rng, Shape{3, 9, 7});
    CHECK((a + b).all_finite());
    CHECK(lincomb(1e3, a, -2.0, b).all_finite());
    CHECK(resize_bilinear(a, 13, 5).all_finite());
    CHECK(clamp01(a).all_finite());
  }
}

TEST_CASE("PNG round trip is exact on 8-bit data") {
  testutil::TempDir dir;
  SeededRng rng(2);
  for (int c : {1, 3}) {
    ImageTensor img(Shape{c, 5, 6});
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(rng.below(256)) / 255.0f;
    const auto p = dir.path / ("rt" + std::to_string(c) + ".png");
    save_image(p, img);
    const ImageTensor back = load_image(p);
    REQUIRE(back.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) {
      CHECK(std::lround(back[i] * 255.0f) == std::lround(img[i] * 255.0f));
    }
    save_image(dir.path / "again.png", back);
    CHECK(load_image(dir.path / "again.png").values() == back.values());
  }
  ImageTensor white(Shape{1, 1, 1}, 1.0f);
  save_image(dir.path / "w.png", white);
  CHECK(load_image(dir.path / "w.png")[0] == 1.0f);
}

TEST_CASE("save clamps and rounds") {
  testutil::TempDir dir;
  const ImageTensor img(Shape{1, 1, 3}, std::vector<float>{-0.5f, 1.7f, 0.5f});
  save_image(dir.path / "c.png", img);
  const ImageTensor back = load_image(dir.path / "c.png");
  CHECK(back[0] == 0.0f);
  CHECK(back[1] == 1.0f);
  CHECK(back[2] == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("16-bit PNG is rejected") {
  testutil::TempDir dir;
  const auto p = dir.path / "deep.png";
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = 2;
  image.height = 2;
  image.format = PNG_FORMAT_LINEAR_Y;
  std::vector<std::uint16_t> px(4, 30000);
  REQUIRE(png_image_write_to_file(&image, p.c_str(), 0, px.data(), 0, nullptr) != 0);
  CHECK_THROWS_WITH_AS(load_image(p), doctest::Contains("unsupported bit depth"), std::runtime_error);
}

TEST_CASE("raw float round trip is bit exact") {
  testutil::TempDir dir;
  SeededRng rng(8);
  const ImageTensor img = gaussian_image(rng, Shape{3, 4, 5});
  save_image(dir.path / "x.gdpf", img);
  const ImageTensor back = load_image(dir.path / "x.gdpf");
  CHECK(back.shape() == img.shape());
  CHECK(back.values() == img.values());
  std::ifstream in(dir.path / "x.gdpf", std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header == "GDPF 3 4 5");
}

TEST_CASE("unreadable files error") {
  CHECK_THROWS(load_image("/nonexistent/file.png"));
  testutil::TempDir dir;
  std::ofstream(dir.path / "junk.png") << "not an image";
  CHECK_THROWS(load_image(dir.path / "junk.png"));
}
