#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nn.hpp"

namespace tbf {

enum class Variant { rgb_only, rgb_noise_concat, full_ahfm };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

struct ModelConfig {
  std::size_t image_h = 512;
  std::size_t image_w = 512;
  std::size_t patch = 16;
  std::size_t dim = 768;   // token width L
  std::size_t depth = 12;  // transformer layers per branch
  std::size_t heads = 12;
  Variant variant = Variant::full_ahfm;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t grid_h() const { return image_h / patch; }
  std::size_t grid_w() const { return image_w / patch; }
  std::size_t tokens() const { return grid_h() * grid_w(); }
};

// One ViT branch; the model owns two of these with unshared storage.
struct BranchParams {
  LinearParams proj;  // (3*p*p) x L patch projection
  Tensor pos;         // N x L learnable position embeddings
  std::vector<TransformerLayerParams> layers;
};

struct TapFeatures {
  Tensor early, mid, late;  // each N x L
};

BranchParams make_branch(const ModelConfig& cfg, Rng& rng);

// 3 x H x W -> N x L: flattened patches through the projection, plus
// position embeddings; patch order is row-major over the grid.
Tensor patch_embed(const Tensor& image, const BranchParams& p, std::size_t patch);

// Runs every layer, tapping after layers D/3, 2D/3 and D (1-indexed).
TapFeatures branch_forward(const Tensor& embedded, const BranchParams& p);

}  // namespace tbf
