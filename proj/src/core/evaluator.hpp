#pragma once

#include <string>
#include <vector>

#include "dataset.hpp"
#include "distort.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace tbf {

struct EvalOptions {
  DistortSpec distort;
  double threshold = 0.5;
  bool pooled = false;    // pool pixels across images instead of per-image means
  bool parallel = true;   // forward images on multiple threads
  std::string split = "test";  // empty = every manifest entry
};

// Forged-class probability map at the ground truth's resolution: the image is
// resized to the model input for the forward pass and the prediction is
// resized back.
Tensor predict_probability(const Tensor& image, const TBFormerParams& params,
                           const ModelConfig& cfg, std::size_t out_h, std::size_t out_w);

// Scores one split of a manifest, optionally pre-distorting the inputs.
MetricsReport evaluate_manifest(const TBFormerParams& params, const ModelConfig& cfg,
                                const Manifest& manifest, const EvalOptions& options);

// Distortion robustness table: header, the undistorted baseline row first,
// then one row per spec with its AUC and the signed delta to the baseline.
std::string robustness_csv(const TBFormerParams& params, const ModelConfig& cfg,
                           const Manifest& manifest,
                           const std::vector<DistortSpec>& specs,
                           const EvalOptions& options);

}  // namespace tbf
