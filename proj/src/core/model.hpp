#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ahfm.hpp"
#include "bayar.hpp"
#include "checkpoint.hpp"
#include "decoder.hpp"
#include "extractor.hpp"

namespace tbf {

// The whole network. `registry` lists every parameter tensor in a fixed
// construction order under a unique dotted name; the optimizer, gradcheck
// and checkpoint IO all walk it.
struct TBFormerParams {
  Variant built_for = Variant::full_ahfm;
  BayarParams bayar;
  BranchParams rgb_branch;
  BranchParams noise_branch;
  AhfmParams ahfm;
  LinearParams concat_proj;  // only constructed for rgb_noise_concat
  DecoderParams decoder;
  std::vector<std::pair<std::string, Tensor>> registry;

  const Tensor* find(const std::string& name) const;
};

// Builds and f32-snaps all parameters deterministically from cfg.seed;
// each submodule draws from its own substream, so e.g. the RGB branch is
// identical across variants for a fixed seed.
TBFormerParams make_model(const ModelConfig& cfg);

// Parameters the optimizer may step for a variant (unused subgraphs get no
// gradient and must not be stepped).
std::vector<std::pair<std::string, Tensor>> active_params(const TBFormerParams& p, Variant v);

// 3 x H x W image in [0,1] -> 2 x H x W class probabilities.
Tensor model_forward(const Tensor& image, const TBFormerParams& p, const ModelConfig& cfg);

// Mean pixel binary cross-entropy against a {0,1} mask; probabilities are
// clamped to [1e-7, 1-1e-7]. forged_weight scales the positive-class term.
Tensor bce_loss(const Tensor& m, const Tensor& gt, double forged_weight = 1.0);

void model_save(const std::string& path, const TBFormerParams& p, const ModelConfig& cfg);
std::pair<TBFormerParams, ModelConfig> model_load(const std::string& path);

// The records model_save writes: registry tensors plus meta.arch/meta.seed.
// Callers may append extra records (training state) before writing.
std::vector<NamedTensor> model_tensors(const TBFormerParams& p, const ModelConfig& cfg);

}  // namespace tbf
