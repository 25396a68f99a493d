#include "trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "distort.hpp"
#include "image_io.hpp"
#include "ops.hpp"
#include "optim.hpp"

namespace tbf {
namespace {

constexpr std::uint64_t kBatchStream = 0xBA7C;

std::vector<LoadedSample> load_split(const Manifest& manifest, const std::string& split,
                                     const ModelConfig& cfg) {
  std::vector<LoadedSample> samples;
  for (const auto& entry : manifest.entries)
    if (entry.split == split) samples.push_back(load_sample(manifest, entry, cfg));
  return samples;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_training_checkpoint(const std::string& path, const TBFormerParams& params,
                               const ModelConfig& cfg, SgdState& sgd,
                               std::size_t next_iter) {
  std::vector<NamedTensor> tensors = model_tensors(params, cfg);
  for (const auto& [name, t] : sgd.params())
    tensors.push_back({"optim.m." + name, t.shape(), sgd.velocity(name)});
  tensors.push_back({"meta.iter", {1}, {static_cast<double>(next_iter)}});
  write_checkpoint(path, tensors);
}

ImageMetrics eval_sample(const LoadedSample& s, const TBFormerParams& params,
                         const ModelConfig& cfg, double threshold) {
  Tensor probs = model_forward(s.image, params, cfg);
  Tensor forged = reshape(slice(probs, 0, 1, 1), {cfg.image_h, cfg.image_w});
  return binary_metrics(forged, s.mask, threshold);
}

}  // namespace

Tensor resize_mask_nearest(const Tensor& mask, std::size_t out_h, std::size_t out_w) {
  if (mask.rank() != 2)
    throw std::invalid_argument("resize_mask_nearest: expected HxW mask, got " +
                                shape_str(mask.shape()));
  const std::size_t ih = mask.extent(0), iw = mask.extent(1);
  if (out_h == 0 || out_w == 0)
    throw std::invalid_argument("resize_mask_nearest: output dims must be positive");
  if (ih == out_h && iw == out_w) return mask;
  Tensor out = Tensor::zeros({out_h, out_w});
  auto& d = out.mutable_data();
  for (std::size_t y = 0; y < out_h; ++y) {
    std::size_t sy = static_cast<std::size_t>((y + 0.5) * ih / out_h);
    if (sy >= ih) sy = ih - 1;
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t sx = static_cast<std::size_t>((x + 0.5) * iw / out_w);
      if (sx >= iw) sx = iw - 1;
      d[y * out_w + x] = mask.data()[sy * iw + sx];
    }
  }
  return out;
}

LoadedSample load_sample(const Manifest& manifest, const ManifestEntry& entry,
                         const ModelConfig& cfg) {
  LoadedSample s;
  s.image = load_ppm(manifest_resolve(manifest, entry.image_path));
  s.mask = load_pgm(manifest_resolve(manifest, entry.mask_path));
  for (double v : s.mask.data())
    if (v != 0.0 && v != 1.0)
      throw std::runtime_error("mask " + entry.mask_path +
                               " is not binary (only 0 and 255 bytes allowed)");
  s.image = resize_bilinear(s.image, cfg.image_h, cfg.image_w);
  s.mask = resize_mask_nearest(s.mask, cfg.image_h, cfg.image_w);
  return s;
}

std::size_t checkpoint_cadence(std::size_t iter_total) {
  return std::max<std::size_t>(1, iter_total / 10);
}

TrainOutcome train_model(const RunConfig& cfg, const Manifest& manifest,
                         const std::string& resume_path, const TrainProgress& progress) {
  if (cfg.train.iter_total == 0)
    throw std::invalid_argument("train: iter_total must be positive");
  if (cfg.train.batch_size == 0)
    throw std::invalid_argument("train: batch_size must be positive");

  TBFormerParams params;
  ModelConfig mcfg;
  std::size_t start_iter = 0;
  std::unordered_map<std::string, std::vector<double>> saved_velocity;
  if (resume_path.empty()) {
    mcfg = cfg.model_config();
    mcfg.validate();
    params = make_model(mcfg);
  } else {
    // The checkpoint is self-describing: its architecture and seed win, so
    // the resumed run replays the original sampling streams.
    auto loaded = model_load(resume_path);
    params = std::move(loaded.first);
    mcfg = loaded.second;
    for (auto& t : read_checkpoint(resume_path)) {
      if (t.name == "meta.iter") {
        start_iter = static_cast<std::size_t>(t.data[0]);
      } else if (t.name.rfind("optim.m.", 0) == 0) {
        saved_velocity.emplace(t.name.substr(8), std::move(t.data));
      }
    }
    if (start_iter > cfg.train.iter_total)
      throw std::invalid_argument("train: checkpoint is already past iter_total");
  }

  std::vector<LoadedSample> train_set = load_split(manifest, "train", mcfg);
  if (train_set.empty())
    throw std::invalid_argument("train: manifest has no samples in the train split");
  std::vector<LoadedSample> val_set = load_split(manifest, "val", mcfg);

  auto active = active_params(params, mcfg.variant);
  SgdState sgd(active);
  if (!saved_velocity.empty()) {
    for (const auto& [name, t] : active) {
      auto it = saved_velocity.find(name);
      if (it == saved_velocity.end())
        throw std::runtime_error("train: checkpoint lacks optimizer state for " + name);
      if (it->second.size() != t.size())
        throw std::runtime_error("train: optimizer state size mismatch for " + name);
      sgd.velocity(name) = it->second;
    }
  } else if (start_iter > 0) {
    throw std::runtime_error("train: checkpoint has meta.iter but no optimizer state");
  }

  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec)
    throw std::runtime_error("train: cannot create " + cfg.out_dir + ": " + ec.message());
  {
    std::ofstream conf(cfg.out_dir + "/train_config.conf", std::ios::trunc);
    conf << run_config_text(cfg);
  }

  const std::string loss_path = cfg.out_dir + "/loss.csv";
  std::ofstream loss_log(loss_path, std::ios::trunc);
  if (!loss_log) throw std::runtime_error("train: cannot open " + loss_path);
  loss_log << "iteration,lr,loss\n";

  const std::string val_path = cfg.out_dir + "/val_metrics.csv";
  std::ofstream val_log;
  if (!val_set.empty()) {
    val_log.open(val_path, std::ios::trunc);
    val_log << "iteration,precision,recall,f1,iou,auc\n";
  }

  const std::size_t cadence = checkpoint_cadence(cfg.train.iter_total);
  const bool uses_bayar = mcfg.variant != Variant::rgb_only;
  TrainOutcome outcome;
  outcome.loss_log = loss_path;

  double last_loss = 0.0;
  for (std::size_t t = start_iter; t < cfg.train.iter_total; ++t) {
    const double lr = lr_at(t, cfg.train);
    Rng batch_rng = Rng(mcfg.seed).stream(t, kBatchStream);

    for (auto& [name, p] : active) p.zero_grad();
    double loss_value = 0.0;
    {
      Tape tape;
      Tensor total;
      for (std::size_t b = 0; b < cfg.train.batch_size; ++b) {
        const LoadedSample& s = train_set[batch_rng.below(train_set.size())];
        Tensor probs = model_forward(s.image, params, mcfg);
        Tensor loss = bce_loss(probs, s.mask, cfg.class_weight);
        total = b == 0 ? loss : add(total, loss);
      }
      Tensor mean_loss =
          scalar_mul(total, 1.0 / static_cast<double>(cfg.train.batch_size));
      loss_value = mean_loss.item();
      if (!std::isfinite(loss_value))
        throw std::runtime_error("train: aborted, non-finite loss at iteration " +
                                 std::to_string(t));
      tape.backward(mean_loss);
    }
    sgd.step(lr, cfg.train.momentum, uses_bayar ? &params.bayar : nullptr,
             cfg.train.clip_norm);
    last_loss = loss_value;

    loss_log << t << ',' << format_g17(lr) << ',' << format_g17(loss_value) << '\n';
    if (progress) progress({t, lr, loss_value});

    const std::size_t done = t + 1;
    if (done % cadence == 0 && done < cfg.train.iter_total) {
      char name[48];
      std::snprintf(name, sizeof(name), "checkpoint_%06zu.tbf", done);
      write_training_checkpoint(cfg.out_dir + "/" + name, params, mcfg, sgd, done);
      if (!val_set.empty()) {
        std::vector<ImageMetrics> per_image;
        std::vector<std::string> names;
        for (std::size_t i = 0; i < val_set.size(); ++i) {
          per_image.push_back(
              eval_sample(val_set[i], params, mcfg, cfg.eval_threshold));
          names.push_back("val_" + std::to_string(i));
        }
        MetricsReport report = make_report(std::move(names), std::move(per_image));
        val_log << done << ',' << format_g17(report.aggregate.precision) << ','
                << format_g17(report.aggregate.recall) << ','
                << format_g17(report.aggregate.f1) << ','
                << format_g17(report.aggregate.iou) << ',';
        if (report.aggregate.auc) val_log << format_g17(*report.aggregate.auc);
        val_log << '\n';
        val_log.flush();
      }
    }
    loss_log.flush();
  }

  outcome.iterations = cfg.train.iter_total;
  outcome.final_loss = last_loss;
  outcome.final_checkpoint = cfg.out_dir + "/model_final.tbf";
  write_training_checkpoint(outcome.final_checkpoint, params, mcfg, sgd,
                            cfg.train.iter_total);
  outcome.params = std::move(params);
  outcome.model = mcfg;
  return outcome;
}

}  // namespace tbf
