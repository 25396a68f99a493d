#include <doctest.h>

#include <functional>
#include <stdexcept>
#include <vector>

#include "core/gradcheck.hpp"
#include "core/ops.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

using namespace tbf;

namespace {

Rng g_rng(0xC0FFEE);

Tensor rand_param(Shape s, double lo = -1.0, double hi = 1.0) {
  std::vector<double> d(shape_numel(s));
  for (auto& v : d) v = g_rng.uniform(lo, hi);
  return Tensor::parameter(std::move(s), std::move(d));
}

Tensor rand_const(const Shape& s) {
  std::vector<double> d(shape_numel(s));
  for (auto& v : d) v = g_rng.uniform(-1.0, 1.0);
  return Tensor::from_data(s, std::move(d));
}

// Finite-difference check of d(sum(op * w))/d(params) with fixed random
// projection weights, so every output element reaches the loss.
double max_err(const std::function<Tensor()>& make_out, NamedParams params) {
  Tensor probe = make_out();
  Tensor w = rand_const(probe.shape());
  auto f = [&]() { return sum_all(mul(make_out(), w)); };
  return grad_check(f, params, 1e-5).max_rel_err;
}

}  // namespace

TEST_CASE("fd: elementwise binary ops") {
  auto a = rand_param({2, 3});
  auto b = rand_param({2, 3});
  CHECK(max_err([&] { return add(a, b); }, {{"a", a}, {"b", b}}) < 1e-4);
  CHECK(max_err([&] { return sub(a, b); }, {{"a", a}, {"b", b}}) < 1e-4);
  CHECK(max_err([&] { return mul(a, b); }, {{"a", a}, {"b", b}}) < 1e-4);
}

TEST_CASE("fd: scalar forms") {
  auto a = rand_param({2, 3});
  auto s = rand_param({1});
  CHECK(max_err([&] { return scalar_mul(a, 0.7); }, {{"a", a}}) < 1e-4);
  CHECK(max_err([&] { return scalar_add(a, -0.3); }, {{"a", a}}) < 1e-4);
  CHECK(max_err([&] { return mul_scalar_tensor(a, s); }, {{"a", a}, {"s", s}}) < 1e-4);
}

TEST_CASE("fd: pointwise nonlinearities") {
  auto a = rand_param({3, 3});
  auto pos = rand_param({2, 4}, 0.5, 2.0);
  // Values kept away from the clamp corners so central differences stay valid.
  auto c = Tensor::parameter({6}, {-1.5, -0.3, 0.0, 0.2, 1.7, 0.42});
  CHECK(max_err([&] { return exp(a); }, {{"a", a}}) < 1e-4);
  CHECK(max_err([&] { return log(pos); }, {{"p", pos}}) < 1e-4);
  CHECK(max_err([&] { return sqrt(pos); }, {{"p", pos}}) < 1e-4);
  CHECK(max_err([&] { return gelu(a); }, {{"a", a}}) < 1e-4);
  CHECK(max_err([&] { return clamp(c, -0.5, 0.5); }, {{"c", c}}) < 1e-4);
}

TEST_CASE("fd: structural ops") {
  auto a = rand_param({2, 6});
  auto b = rand_param({2, 6});
  auto c = rand_param({2, 6});
  CHECK(max_err([&] { return reshape(a, {3, 4}); }, {{"a", a}}) < 1e-4);
  CHECK(max_err([&] { return transpose(a); }, {{"a", a}}) < 1e-4);
  CHECK(max_err([&] { return concat({a, b, c}, 0); }, {{"a", a}, {"b", b}, {"c", c}}) < 1e-4);
  CHECK(max_err([&] { return concat({a, b}, 1); }, {{"a", a}, {"b", b}}) < 1e-4);
  CHECK(max_err([&] { return slice(a, 1, 1, 3); }, {{"a", a}}) < 1e-4);

  auto img = rand_param({2, 4, 4});
  CHECK(max_err([&] { return extract_patches(img, 2); }, {{"img", img}}) < 1e-4);
}

TEST_CASE("fd: matmul") {
  auto a = rand_param({3, 4});
  auto b = rand_param({4, 2});
  CHECK(max_err([&] { return matmul(a, b); }, {{"a", a}, {"b", b}}) < 1e-4);
}

TEST_CASE("fd: reductions") {
  auto a = rand_param({3, 4});
  CHECK(max_err([&] { return sum_all(a); }, {{"a", a}}) < 1e-4);
  CHECK(max_err([&] { return mean_rows(a); }, {{"a", a}}) < 1e-4);
  CHECK(max_err([&] { return var_rows(a); }, {{"a", a}}) < 1e-4);
}

TEST_CASE("fd: softmax along both axes") {
  auto a = rand_param({3, 4});
  CHECK(max_err([&] { return softmax(a, 0); }, {{"a", a}}) < 1e-4);
  CHECK(max_err([&] { return softmax(a, 1); }, {{"a", a}}) < 1e-4);
}

TEST_CASE("fd: layer_norm wrt input and affine params") {
  auto x = rand_param({2, 5});
  auto gamma = rand_param({5}, 0.5, 1.5);
  auto beta = rand_param({5});
  CHECK(max_err([&] { return layer_norm(x, gamma, beta, 1e-5); },
                {{"x", x}, {"gamma", gamma}, {"beta", beta}}) < 1e-4);
}

TEST_CASE("fd: l2_normalize_rows") {
  auto a = rand_param({3, 4}, 0.3, 1.2);
  CHECK(max_err([&] { return l2_normalize_rows(a); }, {{"a", a}}) < 1e-4);
}

TEST_CASE("fd: bias broadcasts") {
  auto x = rand_param({3, 4});
  auto rb = rand_param({4});
  CHECK(max_err([&] { return add_row_bias(x, rb); }, {{"x", x}, {"b", rb}}) < 1e-4);

  auto img = rand_param({3, 2, 2});
  auto cb = rand_param({3});
  CHECK(max_err([&] { return add_channel_bias(img, cb); }, {{"x", img}, {"b", cb}}) < 1e-4);
}

TEST_CASE("fd: conv2d wrt input and kernels") {
  auto x = rand_param({2, 5, 5});
  auto k = rand_param({3, 2, 3, 3});
  CHECK(max_err([&] { return conv2d(x, k, 1, 1); }, {{"x", x}, {"k", k}}) < 1e-4);
  CHECK(max_err([&] { return conv2d(x, k, 2, 1); }, {{"x", x}, {"k", k}}) < 1e-4);
  CHECK(max_err([&] { return conv2d(x, k, 1, 0); }, {{"x", x}, {"k", k}}) < 1e-4);
}

TEST_CASE("fd: pad_replicate") {
  auto x = rand_param({2, 3, 3});
  CHECK(max_err([&] { return pad_replicate(x, 2); }, {{"x", x}}) < 1e-4);
}

TEST_CASE("fd: upsample_bilinear") {
  auto x = rand_param({2, 2, 3});
  CHECK(max_err([&] { return upsample_bilinear(x, 4, 6); }, {{"x", x}}) < 1e-4);
  CHECK(max_err([&] { return upsample_bilinear(x, 2, 3); }, {{"x", x}}) < 1e-4);
}

TEST_CASE("grad_check agrees with an exact quadratic") {
  auto x = Tensor::parameter({1}, {3.0});
  auto rep = grad_check([&] { return mul(x, x); }, {{"x", x}}, 1e-5);
  CHECK(rep.max_rel_err < 1e-9);
  REQUIRE(rep.entries.size() == 1);
  CHECK(rep.entries[0].analytic_at_worst == doctest::Approx(6.0).epsilon(1e-10));
}

TEST_CASE("grad_check reports zero error for an unused parameter") {
  auto x = Tensor::parameter({1}, {3.0});
  auto u = Tensor::parameter({2}, {1.0, 2.0});
  auto rep = grad_check([&] { return mul(x, x); }, {{"x", x}, {"u", u}}, 1e-5);
  CHECK(rep.max_rel_err < 1e-9);
}

TEST_CASE("grad_check validates its inputs") {
  auto x = Tensor::parameter({1}, {1.0});
  CHECK_THROWS_AS(grad_check([&] { return mul(x, x); }, {{"x", x}}, 0.0), std::invalid_argument);
  auto y = mul(x, x);
  CHECK_THROWS_AS(grad_check([&] { return y; }, {{"y", y}}, 1e-5), std::invalid_argument);
}

TEST_CASE("slice backward routes grad only into the sliced region") {
  auto a = Tensor::parameter({2, 4}, {0, 0, 0, 0, 0, 0, 0, 0});
  Tape tape;
  auto loss = sum_all(slice(a, 1, 1, 2));
  tape.backward(loss);
  CHECK(a.grad() == std::vector<double>{0, 1, 1, 0, 0, 1, 1, 0});
}
