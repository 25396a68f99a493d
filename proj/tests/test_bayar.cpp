#include <doctest.h>

#include <cmath>
#include <vector>

#include "core/bayar.hpp"
#include "core/gradcheck.hpp"
#include "core/ops.hpp"

using namespace tbf;

namespace {

BayarParams uniform_bayar(std::size_t k = 5) {
  BayarParams p;
  const std::size_t sz = 3 * 3 * k * k;
  p.kernels = Tensor::parameter({3, 3, k, k}, std::vector<double>(sz, 1.0 / double(k * k - 1)));
  bayar_reproject(p);
  return p;
}

}  // namespace

TEST_CASE("construction satisfies the kernel constraints") {
  Rng rng(5);
  auto p = make_bayar(rng);
  CHECK(bayar_constraints_ok(p));
  // Center weights are exactly -1.
  for (std::size_t pair = 0; pair < 9; ++pair)
    CHECK(p.kernels.data()[pair * 25 + 2 * 5 + 2] == -1.0);
}

TEST_CASE("constant image maps to zero everywhere, border included") {
  Rng rng(6);
  auto p = make_bayar(rng);
  auto img = Tensor::full({3, 9, 11}, 0.7);
  auto noise = bayar_forward(img, p);
  REQUIRE(noise.shape() == Shape{3, 9, 11});
  for (double v : noise.data()) CHECK(std::abs(v) <= 1e-5);
}

TEST_CASE("symmetric kernels kill a linear ramp in the interior") {
  auto p = uniform_bayar();
  std::vector<double> img(3 * 8 * 8);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 0; x < 8; ++x) img[(c * 8 + y) * 8 + x] = 0.1 * double(x);
  auto noise = bayar_forward(Tensor::from_data({3, 8, 8}, img), p);
  // Pixels with full 5x5 support see an antisymmetric deviation that cancels.
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 2; y < 6; ++y)
      for (std::size_t x = 2; x < 6; ++x) CHECK(std::abs(noise.at({c, y, x})) < 1e-12);
}

TEST_CASE("reprojection is idempotent") {
  Rng rng(7);
  auto p = make_bayar(rng);
  auto before = p.kernels.data();
  bayar_reproject(p);
  CHECK(p.kernels.data() == before);
}

TEST_CASE("reprojection normalizes an all-equal surround to uniform") {
  const std::size_t k = 5;
  BayarParams p;
  p.kernels = Tensor::parameter({3, 3, k, k}, std::vector<double>(3 * 3 * k * k, 0.3));
  bayar_reproject(p);
  for (std::size_t pair = 0; pair < 9; ++pair)
    for (std::size_t i = 0; i < k * k; ++i) {
      double v = p.kernels.data()[pair * k * k + i];
      if (i == (k / 2) * k + k / 2)
        CHECK(v == -1.0);
      else
        CHECK(v == doctest::Approx(1.0 / 24.0).epsilon(1e-12));
    }
}

TEST_CASE("reprojection repairs random kernels to tolerance") {
  Rng rng(8);
  BayarParams p;
  p.kernels = init_truncated_normal({3, 3, 5, 5}, 1.0, rng);
  bayar_reproject(p);
  CHECK(bayar_constraints_ok(p, 1e-6));
}

TEST_CASE("degenerate surround sum is reinitialized uniform") {
  const std::size_t k = 3;
  std::vector<double> w(3 * 3 * k * k, 0.0);
  // Surround of the first pair: four +0.5 and four -0.5 -> sum 0.
  double vals[8] = {0.5, -0.5, 0.5, -0.5, 0.5, -0.5, 0.5, -0.5};
  int vi = 0;
  for (std::size_t i = 0; i < k * k; ++i)
    if (i != 4) w[i] = vals[vi++];
  // Other pairs already valid-ish surrounds.
  for (std::size_t pair = 1; pair < 9; ++pair)
    for (std::size_t i = 0; i < k * k; ++i)
      if (i != 4) w[pair * k * k + i] = 1.0 / 8.0;
  BayarParams p;
  p.kernels = Tensor::parameter({3, 3, k, k}, w);
  bayar_reproject(p);
  for (std::size_t i = 0; i < k * k; ++i) {
    double v = p.kernels.data()[i];
    if (i == 4)
      CHECK(v == -1.0);
    else
      CHECK(v == doctest::Approx(1.0 / 8.0));
  }
  CHECK(bayar_constraints_ok(p));
}

TEST_CASE("forward rejects unprojected kernels") {
  BayarParams p;
  p.kernels = Tensor::parameter({3, 3, 5, 5}, std::vector<double>(3 * 3 * 25, 0.0));
  auto img = Tensor::zeros({3, 6, 6});
  CHECK_THROWS_AS(bayar_forward(img, p), std::invalid_argument);
  CHECK_THROWS_AS(bayar_forward(Tensor::zeros({1, 6, 6}), uniform_bayar()), std::invalid_argument);
}

TEST_CASE("forward is differentiable through the kernels") {
  Rng rng(9);
  auto p = make_bayar(rng, 3);
  auto img = init_truncated_normal({3, 4, 4}, 0.5, rng);
  auto rep = grad_check(
      [&] { return sum_all(mul(bayar_forward(img, p), bayar_forward(img, p))); },
      {{"kernels", p.kernels}, {"img", img}}, 1e-5);
  CHECK(rep.max_rel_err < 1e-4);
}
