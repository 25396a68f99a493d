#include "nn.hpp"

#include <cmath>
#include <stdexcept>

namespace tbf {

namespace {
constexpr double kInitStd = 0.02;
}

Tensor init_truncated_normal(Shape shape, double std_dev, Rng& rng) {
  if (std_dev <= 0.0) throw std::invalid_argument("init_truncated_normal: std must be positive");
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = rng.truncated_normal(std_dev);
  return Tensor::parameter(std::move(shape), std::move(data));
}

Tensor init_truncated_normal(Shape shape, double std_dev, std::uint64_t seed) {
  Rng rng(seed);
  return init_truncated_normal(std::move(shape), std_dev, rng);
}

LinearParams make_linear(std::size_t in, std::size_t out, Rng& rng) {
  LinearParams p;
  p.w = init_truncated_normal({in, out}, kInitStd, rng);
  p.b = Tensor::parameter({out}, std::vector<double>(out, 0.0));
  return p;
}

Tensor linear(const Tensor& x, const LinearParams& p) {
  return add_row_bias(matmul(x, p.w), p.b);
}

LayerNormParams make_layer_norm(std::size_t dim) {
  LayerNormParams p;
  p.gamma = Tensor::parameter({dim}, std::vector<double>(dim, 1.0));
  p.beta = Tensor::parameter({dim}, std::vector<double>(dim, 0.0));
  return p;
}

Tensor layer_norm(const Tensor& x, const LayerNormParams& p) {
  return layer_norm(x, p.gamma, p.beta, p.epsilon);
}

TransformerLayerParams make_transformer_layer(std::size_t dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads != 0)
    throw std::invalid_argument("transformer_layer: head count " + std::to_string(heads) +
                                " must divide dim " + std::to_string(dim));
  TransformerLayerParams p;
  p.ln1 = make_layer_norm(dim);
  p.ln2 = make_layer_norm(dim);
  p.attn.q = make_linear(dim, dim, rng);
  p.attn.k = make_linear(dim, dim, rng);
  p.attn.v = make_linear(dim, dim, rng);
  p.attn.o = make_linear(dim, dim, rng);
  p.mlp1 = make_linear(dim, kMlpRatio * dim, rng);
  p.mlp2 = make_linear(kMlpRatio * dim, dim, rng);
  p.heads = heads;
  return p;
}

Tensor msa(const Tensor& x, const AttentionParams& p, std::size_t heads,
           std::vector<Tensor>* attention_out) {
  if (x.rank() != 2) throw std::invalid_argument("msa: expected N x L input, got " + shape_str(x.shape()));
  const std::size_t dim = x.extent(1);
  if (heads == 0 || dim % heads != 0)
    throw std::invalid_argument("msa: head count " + std::to_string(heads) +
                                " must divide dim " + std::to_string(dim));
  const std::size_t dh = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor q = linear(x, p.q);
  Tensor k = linear(x, p.k);
  Tensor v = linear(x, p.v);

  std::vector<Tensor> head_outs;
  head_outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice(q, 1, h * dh, dh);
    Tensor kh = slice(k, 1, h * dh, dh);
    Tensor vh = slice(v, 1, h * dh, dh);
    Tensor attn = softmax(scalar_mul(matmul(qh, transpose(kh)), scale), 1);
    if (attention_out) attention_out->push_back(attn);
    head_outs.push_back(matmul(attn, vh));
  }
  Tensor joined = heads == 1 ? head_outs[0] : concat(head_outs, 1);
  return linear(joined, p.o);
}

Tensor transformer_layer(const Tensor& x, const TransformerLayerParams& p) {
  Tensor m = add(msa(layer_norm(x, p.ln1), p.attn, p.heads), x);
  Tensor hidden = gelu(linear(layer_norm(m, p.ln2), p.mlp1));
  return add(linear(hidden, p.mlp2), m);
}

ConvLayer make_conv_layer(std::size_t c_out, std::size_t c_in, std::size_t k, Rng& rng) {
  if (k % 2 == 0) throw std::invalid_argument("conv_layer: kernel size must be odd");
  ConvLayer p;
  p.kernels = init_truncated_normal({c_out, c_in, k, k}, kInitStd, rng);
  p.bias = Tensor::parameter({c_out}, std::vector<double>(c_out, 0.0));
  return p;
}

Tensor conv_layer(const Tensor& x, const ConvLayer& p) {
  const std::size_t k = p.kernels.extent(2);
  return add_channel_bias(conv2d(x, p.kernels, 1, (k - 1) / 2), p.bias);
}

}  // namespace tbf
