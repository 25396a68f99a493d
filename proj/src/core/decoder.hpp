#pragma once

#include "nn.hpp"

namespace tbf {

// Mask decoder: the fused patch tokens and two learnable category
// embeddings (row 0 authentic, row 1 forged) run jointly through two
// transformer layers; per-pixel class scores are cosines between projected
// patch and category rows, upsampled and then softmaxed over the class axis.
struct DecoderParams {
  LinearParams input_proj;  // L -> L
  Tensor categories;        // 2 x L
  TransformerLayerParams layer1, layer2;
  LinearParams patch_proj;  // L -> L
  LinearParams class_proj;  // L -> L
};

DecoderParams make_decoder(std::size_t dim, std::size_t heads, Rng& rng);

struct DecodeTrace {
  Tensor cosine;      // N x 2, entries in [-1, 1]
  Tensor patch_rows;  // N x L, unit rows
  Tensor class_rows;  // 2 x L, unit rows
};

// Z: L x h x w fused feature map -> M: 2 x H x W class probabilities
// (softmax over the class axis after bilinear upsampling).
Tensor decode(const Tensor& z, const DecoderParams& p, std::size_t out_h, std::size_t out_w,
              DecodeTrace* trace = nullptr);

}  // namespace tbf
