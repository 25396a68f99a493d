#pragma once

#include "nn.hpp"

namespace tbf {

// One tap's fusion parameters: channel merge of the two branches, the
// position-attention projections, the learnable attention weight alpha
// (starts at 0 so the attention path fades in during training), and the
// conv applied after the residual addition.
struct TapFusionParams {
  ConvLayer merge;   // 2L -> L, 3x3
  // q/k are bias-free: a key-side bias shifts each attention row by a
  // constant, which the row softmax cancels exactly, leaving the parameter
  // with a provably zero gradient.
  Tensor q_kernels;  // L/8 x L x 1 x 1
  Tensor k_kernels;  // L/8 x L x 1 x 1
  ConvLayer v;       // L -> L, 1x1
  Tensor alpha;      // {1}
  ConvLayer fuse;    // L -> L, 3x3
};

struct AhfmParams {
  TapFusionParams early, mid, late;
  ConvLayer final_conv;  // L -> L, 3x3 over the hierarchical sum
};

AhfmParams make_ahfm(std::size_t dim, Rng& rng);

// N x L tokens -> L x h x w map; token n covers grid cell (n/w, n%w).
Tensor tokens_to_map(const Tensor& tokens, std::size_t h, std::size_t w);

// Fuses one tap pair: merge conv over the stacked maps gives T-hat; the
// N x N position-attention matrix (row-stochastic) reweights the value
// projection; alpha scales that path before the residual add and fuse conv.
// attention_out, when given, receives the N x N matrix.
Tensor position_attention_fuse(const Tensor& t_rgb, const Tensor& t_noise,
                               const TapFusionParams& p, std::size_t h, std::size_t w,
                               Tensor* attention_out = nullptr);

// Element-wise sum of the three tap fusions, then the final conv.
Tensor hierarchical_fuse(const Tensor& z_early, const Tensor& z_mid, const Tensor& z_late,
                         const AhfmParams& p);

}  // namespace tbf
