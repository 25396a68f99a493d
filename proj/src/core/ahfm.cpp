#include "ahfm.hpp"

#include <stdexcept>

namespace tbf {

namespace {

TapFusionParams make_tap(std::size_t dim, Rng& rng) {
  TapFusionParams p;
  p.merge = make_conv_layer(dim, 2 * dim, 3, rng);
  p.q_kernels = init_truncated_normal({dim / 8, dim, 1, 1}, 0.02, rng);
  p.k_kernels = init_truncated_normal({dim / 8, dim, 1, 1}, 0.02, rng);
  p.v = make_conv_layer(dim, dim, 1, rng);
  p.alpha = Tensor::parameter({1}, {0.0});
  p.fuse = make_conv_layer(dim, dim, 3, rng);
  return p;
}

}  // namespace

AhfmParams make_ahfm(std::size_t dim, Rng& rng) {
  if (dim % 8 != 0) throw std::invalid_argument("ahfm: dim must be a multiple of 8");
  AhfmParams p;
  p.early = make_tap(dim, rng);
  p.mid = make_tap(dim, rng);
  p.late = make_tap(dim, rng);
  p.final_conv = make_conv_layer(dim, dim, 3, rng);
  return p;
}

Tensor tokens_to_map(const Tensor& tokens, std::size_t h, std::size_t w) {
  if (tokens.rank() != 2)
    throw std::invalid_argument("tokens_to_map: expected N x L, got " + shape_str(tokens.shape()));
  if (tokens.extent(0) != h * w)
    throw std::invalid_argument("tokens_to_map: " + std::to_string(tokens.extent(0)) +
                                " tokens do not tile a " + std::to_string(h) + "x" +
                                std::to_string(w) + " grid");
  return reshape(transpose(tokens), {tokens.extent(1), h, w});
}

Tensor position_attention_fuse(const Tensor& t_rgb, const Tensor& t_noise,
                               const TapFusionParams& p, std::size_t h, std::size_t w,
                               Tensor* attention_out) {
  if (t_rgb.shape() != t_noise.shape())
    throw std::invalid_argument("position_attention_fuse: branch shapes differ, " +
                                shape_str(t_rgb.shape()) + " vs " + shape_str(t_noise.shape()));
  const std::size_t n = h * w;
  const std::size_t dim = t_rgb.extent(1);

  Tensor stacked = concat({tokens_to_map(t_rgb, h, w), tokens_to_map(t_noise, h, w)}, 0);
  Tensor t_hat = conv_layer(stacked, p.merge);

  Tensor t1 = reshape(conv2d(t_hat, p.q_kernels, 1, 0), {p.q_kernels.extent(0), n});
  Tensor t2 = reshape(conv2d(t_hat, p.k_kernels, 1, 0), {p.k_kernels.extent(0), n});
  Tensor t3 = reshape(conv_layer(t_hat, p.v), {dim, n});

  Tensor attn = softmax(matmul(transpose(t1), t2), 1);
  if (attention_out) *attention_out = attn;

  Tensor attended = reshape(matmul(t3, attn), {dim, h, w});
  return conv_layer(add(mul_scalar_tensor(attended, p.alpha), t_hat), p.fuse);
}

Tensor hierarchical_fuse(const Tensor& z_early, const Tensor& z_mid, const Tensor& z_late,
                         const AhfmParams& p) {
  if (z_early.shape() != z_mid.shape() || z_mid.shape() != z_late.shape())
    throw std::invalid_argument("hierarchical_fuse: tap shapes differ");
  return conv_layer(add(add(z_early, z_mid), z_late), p.final_conv);
}

}  // namespace tbf
