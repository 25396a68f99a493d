#pragma once

#include <cstdint>
#include <vector>

#include "ops.hpp"
#include "rng.hpp"

namespace tbf {

// Values drawn from N(0, std²) truncated at ±2·std.
Tensor init_truncated_normal(Shape shape, double std_dev, std::uint64_t seed);
Tensor init_truncated_normal(Shape shape, double std_dev, Rng& rng);

struct LinearParams {
  Tensor w;  // in x out
  Tensor b;  // {out}
};
LinearParams make_linear(std::size_t in, std::size_t out, Rng& rng);
Tensor linear(const Tensor& x, const LinearParams& p);  // N x in -> N x out

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
  double epsilon = 1e-6;
};
LayerNormParams make_layer_norm(std::size_t dim);
Tensor layer_norm(const Tensor& x, const LayerNormParams& p);

struct AttentionParams {
  LinearParams q, k, v, o;
};

// Pre-norm block: x + MSA(LN(x)), then + MLP(LN(.)) with GELU between the
// two MLP projections (expansion ratio kMlpRatio).
struct TransformerLayerParams {
  LayerNormParams ln1, ln2;
  AttentionParams attn;
  LinearParams mlp1, mlp2;
  std::size_t heads = 1;
};
inline constexpr std::size_t kMlpRatio = 4;
TransformerLayerParams make_transformer_layer(std::size_t dim, std::size_t heads, Rng& rng);

// Per-head scaled dot-product attention over rows of x; each head's weight
// matrix is row-stochastic. attention_out, when given, receives one N x N
// weight matrix per head.
Tensor msa(const Tensor& x, const AttentionParams& p, std::size_t heads,
           std::vector<Tensor>* attention_out = nullptr);
Tensor transformer_layer(const Tensor& x, const TransformerLayerParams& p);

struct ConvLayer {
  Tensor kernels;  // C_out x C_in x k x k
  Tensor bias;     // {C_out}
};
ConvLayer make_conv_layer(std::size_t c_out, std::size_t c_in, std::size_t k, Rng& rng);
// Stride-1 convolution padded by (k-1)/2, preserving h x w.
Tensor conv_layer(const Tensor& x, const ConvLayer& p);

}  // namespace tbf
