#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/distort.hpp"
#include "core/rng.hpp"
#include "core/synth.hpp"

using namespace tbf;

namespace {

Tensor random_image(std::uint64_t seed, std::size_t c, std::size_t h, std::size_t w) {
  Rng rng(seed);
  Tensor t = c == 1 ? Tensor::zeros({h, w}) : Tensor::zeros({c, h, w});
  for (double& v : t.mutable_data()) v = rng.uniform01();
  return t;
}

double psnr(const Tensor& a, const Tensor& b) {
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

TEST_CASE("distort spec parsing") {
  CHECK(parse_distort("none").kind == DistortSpec::Kind::none);
  DistortSpec r = parse_distort("resize:0.78");
  CHECK(r.kind == DistortSpec::Kind::resize);
  CHECK(r.factor == doctest::Approx(0.78));
  DistortSpec b = parse_distort("gaussian_blur:3");
  CHECK(b.kind == DistortSpec::Kind::gaussian_blur);
  CHECK(b.ksize == 3);
  DistortSpec j = parse_distort("jpeg:85");
  CHECK(j.kind == DistortSpec::Kind::jpeg);
  CHECK(j.quality == 85);

  CHECK_THROWS_AS(parse_distort("sharpen:2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_distort("resize"), std::invalid_argument);
  CHECK_THROWS_AS(parse_distort("resize:0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_distort("resize:1.5"), std::invalid_argument);
  CHECK_THROWS_AS(parse_distort("gaussian_blur:4"), std::invalid_argument);
  CHECK_THROWS_AS(parse_distort("gaussian_blur:1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_distort("jpeg:0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_distort("jpeg:101"), std::invalid_argument);
  CHECK_THROWS_AS(parse_distort("jpeg:85x"), std::invalid_argument);

  CHECK(distort_name(r) == "resize:0.78");
  CHECK(distort_name(b) == "gaussian_blur:3");
  CHECK(distort_name(j) == "jpeg:85");
  CHECK(distort_name(DistortSpec{}) == "none");
}

TEST_CASE("resize factor 1.0 is an exact identity") {
  Tensor img = random_image(3, 3, 6, 9);
  Tensor out = resize_by_factor(img, 1.0);
  CHECK(out.shape() == img.shape());
  CHECK(out.data() == img.data());
  Tensor via_spec = apply_distortion(img, parse_distort("resize:1"));
  CHECK(via_spec.data() == img.data());
}

TEST_CASE("resize dimensions and bilinear values") {
  Tensor img = random_image(4, 3, 8, 8);
  Tensor half = resize_by_factor(img, 0.5);
  REQUIRE(half.shape() == Shape{3, 4, 4});

  // Halving with the half-pixel convention averages 2x2 source blocks.
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 4; ++y)
      for (std::size_t x = 0; x < 4; ++x) {
        const double expect = (img.at({c, 2 * y, 2 * x}) + img.at({c, 2 * y, 2 * x + 1}) +
                               img.at({c, 2 * y + 1, 2 * x}) +
                               img.at({c, 2 * y + 1, 2 * x + 1})) /
                              4.0;
        CHECK(half.at({c, y, x}) == doctest::Approx(expect).epsilon(1e-12));
      }

  Tensor tiny = resize_by_factor(random_image(5, 1, 5, 5), 0.1);
  CHECK(tiny.shape() == Shape{1, 1});  // round(0.5) clamps to at least 1

  Tensor constant = Tensor::full({3, 7, 5}, 0.42);
  Tensor small = resize_by_factor(constant, 0.6);
  REQUIRE(small.shape() == Shape{3, 4, 3});
  for (double v : small.data()) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));
}

TEST_CASE("gaussian taps match the formula and sum to one") {
  for (std::size_t k : {3u, 5u, 7u, 9u}) {
    std::vector<double> taps = gaussian_taps(k);
    REQUIRE(taps.size() == k);
    const double sigma = 0.3 * ((k - 1.0) / 2.0 - 1.0) + 0.8;
    std::vector<double> expect(k);
    double norm = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double d = static_cast<double>(i) - (k - 1.0) / 2.0;
      expect[i] = std::exp(-d * d / (2.0 * sigma * sigma));
      norm += expect[i];
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      CHECK(taps[i] == doctest::Approx(expect[i] / norm).epsilon(1e-12));
      CHECK(taps[i] == taps[k - 1 - i]);
      sum += taps[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-9);
  }
  CHECK_THROWS_AS(gaussian_taps(4), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_taps(0), std::invalid_argument);
}

TEST_CASE("blur of a constant image returns the same bits") {
  Tensor img = Tensor::full({3, 9, 11}, 0.3712345);
  Tensor out = gaussian_blur(img, 5);
  CHECK(out.data() == img.data());
}

TEST_CASE("separable blur matches a direct 2-D convolution") {
  Tensor img = random_image(6, 1, 7, 6);
  const std::size_t k = 5;
  Tensor out = gaussian_blur(img, k);
  std::vector<double> taps = gaussian_taps(k);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(k / 2);
  const std::ptrdiff_t h = 7, w = 6;
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
        for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
          const std::ptrdiff_t sy = std::min(h - 1, std::max<std::ptrdiff_t>(0, y + dy));
          const std::ptrdiff_t sx = std::min(w - 1, std::max<std::ptrdiff_t>(0, x + dx));
          acc += taps[static_cast<std::size_t>(dy + r)] *
                 taps[static_cast<std::size_t>(dx + r)] *
                 img.data()[static_cast<std::size_t>(sy * w + sx)];
        }
      CHECK(out.at({static_cast<std::size_t>(y), static_cast<std::size_t>(x)}) ==
            doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("jpeg q=100 roundtrip keeps PSNR above 40 dB") {
  Tensor img = synth_background(21, 0, 24, 24);
  Tensor out = jpeg_roundtrip(img, 100);
  REQUIRE(out.shape() == img.shape());
  CHECK(psnr(img, out) > 40.0);
}

TEST_CASE("jpeg quality ladder degrades monotonically-ish") {
  Tensor img = synth_background(22, 1, 16, 16);
  const double hi = psnr(img, jpeg_roundtrip(img, 95));
  const double lo = psnr(img, jpeg_roundtrip(img, 10));
  CHECK(hi > lo);
  CHECK(lo > 5.0);  // still an image, not garbage
}

TEST_CASE("jpeg handles sizes that are not multiples of 8") {
  Tensor img = random_image(8, 3, 10, 6);
  Tensor out = jpeg_roundtrip(img, 80);
  REQUIRE(out.shape() == img.shape());
  for (double v : out.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("jpeg of a constant image stays nearly constant") {
  Tensor img = Tensor::full({1, 8, 8}, 0.5);
  Tensor out = jpeg_roundtrip(img, 100);
  for (double v : out.data()) CHECK(v == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("apply_distortion output stays inside [0,1]") {
  Tensor img = random_image(9, 3, 12, 12);
  for (const char* spec : {"resize:0.6", "gaussian_blur:3", "jpeg:40"}) {
    Tensor out = apply_distortion(img, parse_distort(spec));
    for (double v : out.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(apply_distortion(img, DistortSpec{}).data() == img.data());
}
