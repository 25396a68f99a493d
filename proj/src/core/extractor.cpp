#include "extractor.hpp"

#include <stdexcept>

namespace tbf {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::rgb_only: return "rgb_only";
    case Variant::rgb_noise_concat: return "rgb_noise_concat";
    case Variant::full_ahfm: return "full_ahfm";
  }
  throw std::logic_error("variant_name: bad enum value");
}

Variant variant_from_name(const std::string& name) {
  if (name == "rgb_only") return Variant::rgb_only;
  if (name == "rgb_noise_concat") return Variant::rgb_noise_concat;
  if (name == "full_ahfm") return Variant::full_ahfm;
  throw std::invalid_argument("unknown variant '" + name +
                              "' (expected rgb_only, rgb_noise_concat or full_ahfm)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (image_h == 0 || image_w == 0 || patch == 0 || dim == 0 || depth == 0 || heads == 0)
    fail("all geometry fields must be positive");
  if (image_h % patch != 0)
    fail("image_h " + std::to_string(image_h) + " not divisible by patch " + std::to_string(patch));
  if (image_w % patch != 0)
    fail("image_w " + std::to_string(image_w) + " not divisible by patch " + std::to_string(patch));
  if (depth % 3 != 0) fail("depth " + std::to_string(depth) + " must be a multiple of 3");
  if (dim % heads != 0)
    fail("dim " + std::to_string(dim) + " not divisible by heads " + std::to_string(heads));
  if (dim % 8 != 0) fail("dim " + std::to_string(dim) + " must be a multiple of 8");
}

BranchParams make_branch(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  BranchParams p;
  p.proj = make_linear(3 * cfg.patch * cfg.patch, cfg.dim, rng);
  p.pos = init_truncated_normal({cfg.tokens(), cfg.dim}, 0.02, rng);
  p.layers.reserve(cfg.depth);
  for (std::size_t i = 0; i < cfg.depth; ++i)
    p.layers.push_back(make_transformer_layer(cfg.dim, cfg.heads, rng));
  return p;
}

Tensor patch_embed(const Tensor& image, const BranchParams& p, std::size_t patch) {
  Tensor rows = extract_patches(image, patch);
  Tensor embedded = linear(rows, p.proj);
  if (embedded.shape() != p.pos.shape())
    throw std::invalid_argument("patch_embed: " + shape_str(embedded.shape()) +
                                " tokens vs " + shape_str(p.pos.shape()) + " position embeddings");
  return add(embedded, p.pos);
}

TapFeatures branch_forward(const Tensor& embedded, const BranchParams& p) {
  const std::size_t depth = p.layers.size();
  if (depth == 0 || depth % 3 != 0)
    throw std::invalid_argument("branch_forward: layer count must be a positive multiple of 3");
  TapFeatures taps;
  Tensor x = embedded;
  for (std::size_t i = 0; i < depth; ++i) {
    x = transformer_layer(x, p.layers[i]);
    if (i + 1 == depth / 3) taps.early = x;
    if (i + 1 == 2 * depth / 3) taps.mid = x;
  }
  taps.late = x;
  return taps;
}

}  // namespace tbf
