#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "runconfig.hpp"

namespace tbf {

struct TrainingRecord {
  std::size_t iteration = 0;
  double lr = 0.0;
  double loss = 0.0;
};

using TrainProgress = std::function<void(const TrainingRecord&)>;

struct TrainOutcome {
  std::size_t iterations = 0;
  double final_loss = 0.0;
  std::string final_checkpoint;
  std::string loss_log;
  TBFormerParams params;
  ModelConfig model;
};

struct LoadedSample {
  Tensor image;  // resized to the model input
  Tensor mask;   // nearest-resized, still {0,1}
};

// Nearest-neighbor resampling: keeps masks binary.
Tensor resize_mask_nearest(const Tensor& mask, std::size_t out_h, std::size_t out_w);

LoadedSample load_sample(const Manifest& manifest, const ManifestEntry& entry,
                         const ModelConfig& cfg);

// Checkpoints land every max(1, iter_total/10) iterations, plus the final one.
std::size_t checkpoint_cadence(std::size_t iter_total);

// Deterministic SGD loop over the manifest's train split. Writes loss.csv,
// periodic checkpoints with optimizer state, per-checkpoint val metrics, and
// model_final.tbf under cfg.out_dir. `resume_path` continues a training
// checkpoint bit-exactly. Aborts with a diagnostic on non-finite loss.
TrainOutcome train_model(const RunConfig& cfg, const Manifest& manifest,
                         const std::string& resume_path = "",
                         const TrainProgress& progress = {});

}  // namespace tbf
