#pragma once

#include "tensor.hpp"

namespace tbf {

// Elementwise (shapes must match exactly; the only broadcast anywhere is
// scalar-by-tensor via mul_scalar_tensor and the two explicit bias ops).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor scalar_add(const Tensor& a, double s);
Tensor mul_scalar_tensor(const Tensor& a, const Tensor& s);  // s has one element
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor gelu(const Tensor& a);

// Structure. reshape/transpose are data-preserving bijections.
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);  // rank 2
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t len);
// C x H x W image -> N x (C*p*p) patch rows, row-major over the patch grid.
Tensor extract_patches(const Tensor& image, std::size_t patch);

// Linear algebra and reductions (f64 accumulation throughout).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor sum_all(const Tensor& a);   // -> shape {1}
Tensor mean_rows(const Tensor& a); // N x L -> {N}
Tensor var_rows(const Tensor& a);  // biased variance per row, N x L -> {N}
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
Tensor l2_normalize_rows(const Tensor& a);  // rows scaled to unit norm, max(|v|,1e-12) guard

// Bias broadcasts.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);      // N x L + {L}
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);  // C x H x W + {C}

// Spatial.
Tensor conv2d(const Tensor& x, const Tensor& kernels, std::size_t stride, std::size_t pad);
Tensor pad_replicate(const Tensor& x, std::size_t p);
Tensor upsample_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);

}  // namespace tbf
