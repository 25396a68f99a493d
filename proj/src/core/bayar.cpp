#include "bayar.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace tbf {

namespace {

struct KernelView {
  std::size_t k;
  std::size_t count;  // channel pairs

  std::size_t center(std::size_t pair) const { return pair * k * k + (k / 2) * k + k / 2; }
};

KernelView view_of(const BayarParams& p) {
  if (p.kernels.rank() != 4 || p.kernels.extent(0) != 3 || p.kernels.extent(1) != 3)
    throw std::invalid_argument("bayar: kernels must be 3x3xkxk, got " + shape_str(p.kernels.shape()));
  const std::size_t k = p.kernels.extent(2);
  if (k != p.kernels.extent(3) || k % 2 == 0)
    throw std::invalid_argument("bayar: kernel window must be square and odd");
  return {k, 9};
}

}  // namespace

BayarParams make_bayar(Rng& rng, std::size_t k) {
  if (k % 2 == 0 || k < 3) throw std::invalid_argument("bayar: kernel size must be odd and >= 3");
  BayarParams p;
  // Uniform surround plus a little noise, so the first reprojection divides
  // by a sum near 1 instead of a near-zero random sum.
  const double base = 1.0 / static_cast<double>(k * k - 1);
  p.kernels = init_truncated_normal({3, 3, k, k}, 0.02, rng);
  for (auto& v : p.kernels.mutable_data()) v += base;
  bayar_reproject(p);
  return p;
}

bool bayar_constraints_ok(const BayarParams& p, double tol) {
  const auto v = view_of(p);
  const auto& w = p.kernels.data();
  for (std::size_t c = 0; c < v.count; ++c) {
    const std::size_t center = v.center(c);
    if (std::abs(w[center] + 1.0) > tol) return false;
    double s = 0.0;
    for (std::size_t i = c * v.k * v.k; i < (c + 1) * v.k * v.k; ++i)
      if (i != center) s += w[i];
    if (std::abs(s - 1.0) > tol) return false;
  }
  return true;
}

void bayar_reproject(BayarParams& p) {
  const auto v = view_of(p);
  auto& w = p.kernels.mutable_data();
  const double uniform = 1.0 / static_cast<double>(v.k * v.k - 1);
  for (std::size_t c = 0; c < v.count; ++c) {
    const std::size_t center = v.center(c);
    w[center] = -1.0;
    double s = 0.0;
    for (std::size_t i = c * v.k * v.k; i < (c + 1) * v.k * v.k; ++i)
      if (i != center) s += w[i];
    if (std::abs(s) < 1e-12) {
      std::cerr << "bayar_reproject: channel pair " << c
                << " degenerated (surround sum ~0); reinitialized uniform\n";
      for (std::size_t i = c * v.k * v.k; i < (c + 1) * v.k * v.k; ++i)
        if (i != center) w[i] = uniform;
    } else if (std::abs(s - 1.0) > 1e-9) {
      for (std::size_t i = c * v.k * v.k; i < (c + 1) * v.k * v.k; ++i)
        if (i != center) w[i] /= s;
    }
  }
}

Tensor bayar_forward(const Tensor& image, const BayarParams& p) {
  const auto v = view_of(p);
  if (image.rank() != 3 || image.extent(0) != 3)
    throw std::invalid_argument("bayar_forward: expected 3xHxW image, got " + shape_str(image.shape()));
  if (!bayar_constraints_ok(p, 1e-3))
    throw std::invalid_argument("bayar_forward: kernel constraints violated; reproject first");
  return conv2d(pad_replicate(image, (v.k - 1) / 2), p.kernels, 1, 0);
}

}  // namespace tbf
