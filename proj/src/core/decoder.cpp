#include "decoder.hpp"

#include <stdexcept>

namespace tbf {

DecoderParams make_decoder(std::size_t dim, std::size_t heads, Rng& rng) {
  DecoderParams p;
  p.input_proj = make_linear(dim, dim, rng);
  p.categories = init_truncated_normal({2, dim}, 0.02, rng);
  p.layer1 = make_transformer_layer(dim, heads, rng);
  p.layer2 = make_transformer_layer(dim, heads, rng);
  p.patch_proj = make_linear(dim, dim, rng);
  p.class_proj = make_linear(dim, dim, rng);
  return p;
}

Tensor decode(const Tensor& z, const DecoderParams& p, std::size_t out_h, std::size_t out_w,
              DecodeTrace* trace) {
  if (z.rank() != 3)
    throw std::invalid_argument("decode: expected L x h x w feature map, got " +
                                shape_str(z.shape()));
  const std::size_t dim = z.extent(0);
  const std::size_t h = z.extent(1), w = z.extent(2);
  const std::size_t n = h * w;

  Tensor tokens = linear(transpose(reshape(z, {dim, n})), p.input_proj);
  Tensor seq = concat({tokens, p.categories}, 0);
  seq = transformer_layer(seq, p.layer1);
  seq = transformer_layer(seq, p.layer2);

  Tensor patch_rows = l2_normalize_rows(linear(slice(seq, 0, 0, n), p.patch_proj));
  Tensor class_rows = l2_normalize_rows(linear(slice(seq, 0, n, 2), p.class_proj));
  Tensor cosine = matmul(patch_rows, transpose(class_rows));  // N x 2
  if (trace) {
    trace->cosine = cosine;
    trace->patch_rows = patch_rows;
    trace->class_rows = class_rows;
  }

  Tensor logits = reshape(transpose(cosine), {2, h, w});
  return softmax(upsample_bilinear(logits, out_h, out_w), 0);
}

}  // namespace tbf
