#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "tender/image.hpp"

using namespace tender;
using namespace tender::image;

namespace {

GrayImage random_gray(std::mt19937& gen, int w, int h) {
  std::uniform_int_distribution<int> d(0, 255);
  GrayImage img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(d(gen));
  return img;
}

// Exhaustive between-class variance scan, lowest argmax.
int otsu_oracle(const GrayImage& img) {
  const auto& px = img.data();
  double best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 256; ++t) {
    double n0 = 0, n1 = 0, s0 = 0, s1 = 0;
    for (auto p : px) {
      if (p <= t) {
        n0 += 1;
        s0 += p;
      } else {
        n1 += 1;
        s1 += p;
      }
    }
    if (n0 == 0 || n1 == 0) continue;
    double n = n0 + n1;
    double d = s0 / n0 - s1 / n1;
    double var = (n0 / n) * (n1 / n) * d * d;
    if (var > best + 1e-9) {
      best = var;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace

TEST_CASE("to_grayscale examples") {
  CHECK(to_grayscale(ColorImage(1, 1, {255, 255, 255})).at(0, 0) == 255);
  CHECK(to_grayscale(ColorImage(1, 1, {0, 0, 0})).at(0, 0) == 0);
  CHECK(to_grayscale(ColorImage(1, 1, {255, 0, 0})).at(0, 0) == 76);
  CHECK(to_grayscale(ColorImage(1, 1, {0, 255, 0})).at(0, 0) == 150);
  CHECK(to_grayscale(ColorImage(1, 1, {0, 0, 255})).at(0, 0) == 29);
}

TEST_CASE("to_grayscale matches integer-weight oracle on random pixels") {
  std::mt19937 gen(3);
  std::uniform_int_distribution<int> d(0, 255);
  ColorImage img(17, 9);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(d(gen));
  auto g = to_grayscale(img);
  REQUIRE(g.width() == 17);
  REQUIRE(g.height() == 9);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x < 17; ++x) {
      // 299R + 587G + 114B over 1000, rounded half up, in exact integers
      long v = 299L * img.at(x, y, 0) + 587L * img.at(x, y, 1) + 114L * img.at(x, y, 2);
      long expect = (v + 500) / 1000;
      if (v % 1000 == 500) {
        // exact half: binary floating point may land on either side
        CHECK(std::abs(g.at(x, y) - expect) <= 1);
      } else {
        CHECK(g.at(x, y) == expect);
      }
    }
  }
}

TEST_CASE("gray content survives a replicate-channel round trip") {
  std::mt19937 gen(5);
  auto g = random_gray(gen, 11, 7);
  ColorImage c(11, 7);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 11; ++x)
      for (int ch = 0; ch < 3; ++ch) c.at(x, y, ch) = g.at(x, y);
  CHECK(to_grayscale(c) == g);
}

TEST_CASE("threshold_binary examples") {
  GrayImage zeros(4, 3, 0);
  CHECK(threshold_binary(zeros, 128, false).count_foreground() == 0);

  GrayImage two(2, 1, {0, 255});
  auto b = threshold_binary(two, 128, true);
  CHECK(b.at(0, 0));
  CHECK_FALSE(b.at(1, 0));

  auto plain = threshold_binary(two, 128, false);
  CHECK_FALSE(plain.at(0, 0));
  CHECK(plain.at(1, 0));
}

TEST_CASE("Otsu on a bimodal histogram separates the classes") {
  std::vector<std::uint8_t> px(100);
  for (int i = 0; i < 100; ++i) px[i] = i < 50 ? 10 : 200;
  std::shuffle(px.begin(), px.end(), std::mt19937(1));
  GrayImage img(10, 10, px);
  int t = otsu_threshold(img);
  CHECK(t >= 10);
  CHECK(t <= 199);
  CHECK(t == otsu_oracle(img));
  auto b = threshold_binary(img, kAutoThreshold, false);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) CHECK(b.at(x, y) == (img.at(x, y) == 200));
}

TEST_CASE("Otsu agrees with exhaustive scan on random images") {
  std::mt19937 gen(11);
  for (int trial = 0; trial < 40; ++trial) {
    auto img = random_gray(gen, 8 + trial % 5, 6 + trial % 3);
    CHECK(otsu_threshold(img) == otsu_oracle(img));
  }
}

TEST_CASE("threshold_binary partitions every pixel") {
  std::mt19937 gen(2);
  for (int t : {0, 1, 77, 128, 254, 255}) {
    auto img = random_gray(gen, 13, 5);
    for (bool inv : {false, true}) {
      auto b = threshold_binary(img, static_cast<std::uint8_t>(t), inv);
      std::size_t fg = 0, bg = 0;
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 13; ++x) {
          bool expect = (img.at(x, y) > t) != inv;
          CHECK(b.at(x, y) == expect);
          (b.at(x, y) ? fg : bg)++;
        }
      CHECK(fg + bg == 65);
      CHECK(b.count_foreground() == fg);
    }
  }
}

TEST_CASE("pad_to_square examples") {
  GrayImage wide(100, 50, 9);
  auto sq = pad_to_square(wide);
  REQUIRE(sq.width() == 100);
  REQUIRE(sq.height() == 100);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x) CHECK(sq.at(x, y) == (y < 50 ? 9 : 0));

  GrayImage square(3, 3, 4);
  CHECK(pad_to_square(square) == square);

  GrayImage tiny(2, 1, {7, 9});
  CHECK(pad_to_square(tiny) == GrayImage(2, 2, {7, 9, 0, 0}));
  CHECK(pad_to_square(tiny, 255) == GrayImage(2, 2, {7, 9, 255, 255}));

  ColorImage tall(1, 2, {1, 2, 3, 4, 5, 6});
  CHECK(pad_to_square(tall, 8) == ColorImage(2, 2, {1, 2, 3, 8, 8, 8, 4, 5, 6, 8, 8, 8}));
}

TEST_CASE("pad_to_square then crop recovers the original") {
  std::mt19937 gen(8);
  for (int trial = 0; trial < 30; ++trial) {
    int w = 1 + static_cast<int>(gen() % 20), h = 1 + static_cast<int>(gen() % 20);
    auto img = random_gray(gen, w, h);
    auto sq = pad_to_square(img, static_cast<std::uint8_t>(gen() % 256));
    CHECK(sq.width() == std::max(w, h));
    CHECK(sq.height() == sq.width());
    CHECK(crop(sq, {0, 0, w, h}) == img);
  }
}

TEST_CASE("resize_bilinear examples") {
  std::mt19937 gen(4);
  auto img = random_gray(gen, 7, 5);
  CHECK(resize_bilinear(img, 7, 5) == img);

  GrayImage flat(6, 4, 123);
  for (auto [w, h] : {std::pair{1, 1}, {3, 9}, {13, 2}, {64, 64}})
    CHECK(resize_bilinear(flat, w, h) == GrayImage(w, h, 123));

  GrayImage quad(2, 2, {0, 100, 200, 100});
  CHECK(resize_bilinear(quad, 1, 1).at(0, 0) == 100);

  CHECK_THROWS_AS(resize_bilinear(img, 0, 3), Error);
}

TEST_CASE("resize_bilinear matches the direct formula") {
  std::mt19937 gen(6);
  for (int trial = 0; trial < 20; ++trial) {
    int w = 2 + static_cast<int>(gen() % 9), h = 2 + static_cast<int>(gen() % 9);
    int tw = 1 + static_cast<int>(gen() % 15), th = 1 + static_cast<int>(gen() % 15);
    auto img = random_gray(gen, w, h);
    auto out = resize_bilinear(img, tw, th);
    double sx = static_cast<double>(w) / tw, sy = static_cast<double>(h) / th;
    for (int y = 0; y < th; ++y) {
      for (int x = 0; x < tw; ++x) {
        double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, w - 1.0);
        double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, h - 1.0);
        int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
        int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
        double ax = fx - x0, ay = fy - y0;
        double top = img.at(x0, y0) * (1 - ax) + img.at(x1, y0) * ax;
        double bot = img.at(x0, y1) * (1 - ax) + img.at(x1, y1) * ax;
        double v = top * (1 - ay) + bot * ay;
        // allow the oracle's own rounding ambiguity right at .5
        CHECK(std::abs(out.at(x, y) - std::floor(v + 0.5)) <= (std::abs(v - std::floor(v) - 0.5) < 1e-9 ? 1 : 0));
      }
    }
  }
}

TEST_CASE("resize_bilinear stays within the input range") {
  std::mt19937 gen(9);
  for (int trial = 0; trial < 30; ++trial) {
    int w = 1 + static_cast<int>(gen() % 12), h = 1 + static_cast<int>(gen() % 12);
    auto img = random_gray(gen, w, h);
    auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
    auto out = resize_bilinear(img, 1 + static_cast<int>(gen() % 30), 1 + static_cast<int>(gen() % 30));
    for (auto v : out.data()) {
      CHECK(v >= *lo);
      CHECK(v <= *hi);
    }
  }
}

TEST_CASE("crop examples") {
  std::mt19937 gen(10);
  auto img = random_gray(gen, 5, 4);
  CHECK(crop(img, {0, 0, 5, 4}) == img);
  CHECK(crop(img, {0, 0, 1, 1}) == GrayImage(1, 1, {img.at(0, 0)}));
  auto c = crop(img, {1, 2, 3, 2});
  CHECK(c == GrayImage(3, 2, {img.at(1, 2), img.at(2, 2), img.at(3, 2), img.at(1, 3), img.at(2, 3), img.at(3, 3)}));

  try {
    crop(img, {0, 0, 6, 4});
    FAIL("expected OutOfBounds");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfBounds);
  }
  CHECK_THROWS_AS(crop(img, {-1, 0, 2, 2}), Error);
  CHECK_THROWS_AS(crop(img, {0, 3, 1, 2}), Error);
}

TEST_CASE("raster rejects inconsistent buffers") {
  CHECK_THROWS_AS(GrayImage(2, 2, std::vector<std::uint8_t>{1, 2, 3}), Error);
  CHECK_THROWS_AS(ColorImage(0, 1), Error);
}

TEST_CASE("iou and strict containment") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == doctest::Approx(1.0));
  CHECK(iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0));
  CHECK(iou({0, 0, 2, 2}, {5, 5, 2, 2}) == 0.0);
  CHECK(strictly_inside({2, 2, 3, 3}, {0, 0, 10, 10}));
  CHECK_FALSE(strictly_inside({0, 2, 3, 3}, {0, 0, 10, 10}));
  CHECK_FALSE(strictly_inside({0, 0, 10, 10}, {0, 0, 10, 10}));
}
