#include "evaluator.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "image_io.hpp"
#include "ops.hpp"

namespace tbf {
namespace {

struct ScoredImage {
  Tensor pred;  // forged probability at ground-truth resolution
  Tensor gt;
  std::string name;
};

ScoredImage score_one(const Manifest& manifest, const ManifestEntry& entry,
                      const TBFormerParams& params, const ModelConfig& cfg,
                      const DistortSpec& distort) {
  ScoredImage s;
  Tensor image = load_ppm(manifest_resolve(manifest, entry.image_path));
  s.gt = load_pgm(manifest_resolve(manifest, entry.mask_path));
  image = apply_distortion(image, distort);
  s.pred = predict_probability(image, params, cfg, s.gt.extent(0), s.gt.extent(1));
  s.name = entry.image_path;
  return s;
}

}  // namespace

Tensor predict_probability(const Tensor& image, const TBFormerParams& params,
                           const ModelConfig& cfg, std::size_t out_h,
                           std::size_t out_w) {
  Tensor input = resize_bilinear(image, cfg.image_h, cfg.image_w);
  Tensor probs = model_forward(input, params, cfg);
  Tensor forged = reshape(slice(probs, 0, 1, 1), {cfg.image_h, cfg.image_w});
  return resize_bilinear(forged, out_h, out_w);
}

MetricsReport evaluate_manifest(const TBFormerParams& params, const ModelConfig& cfg,
                                const Manifest& manifest, const EvalOptions& options) {
  std::vector<const ManifestEntry*> entries;
  for (const auto& e : manifest.entries)
    if (options.split.empty() || e.split == options.split) entries.push_back(&e);
  if (entries.empty())
    throw std::invalid_argument("eval: no manifest entries in split \"" +
                                options.split + "\"");

  // Forwards are pure (no tape is active here), so images can be scored on
  // worker threads; metric math stays sequential for a thread-count-independent
  // result.
  std::vector<ScoredImage> scored(entries.size());
  auto worker = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < entries.size(); i += step)
      scored[i] = score_one(manifest, *entries[i], params, cfg, options.distort);
  };
  const std::size_t threads =
      options.parallel
          ? std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()),
                                  entries.size())
          : 1;
  if (threads <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker, w, threads);
    for (auto& th : pool) th.join();
  }

  if (options.pooled) {
    // One virtual image holding every pixel of the split.
    std::size_t total = 0;
    for (const auto& s : scored) total += s.pred.size();
    std::vector<double> pred, gt;
    pred.reserve(total);
    gt.reserve(total);
    for (const auto& s : scored) {
      pred.insert(pred.end(), s.pred.data().begin(), s.pred.data().end());
      gt.insert(gt.end(), s.gt.data().begin(), s.gt.data().end());
    }
    Tensor pooled_pred = Tensor::from_data({total}, std::move(pred));
    Tensor pooled_gt = Tensor::from_data({total}, std::move(gt));
    return make_report({"pooled"},
                       {binary_metrics(pooled_pred, pooled_gt, options.threshold)});
  }

  std::vector<std::string> names;
  std::vector<ImageMetrics> per_image;
  names.reserve(scored.size());
  per_image.reserve(scored.size());
  for (const auto& s : scored) {
    names.push_back(s.name);
    per_image.push_back(binary_metrics(s.pred, s.gt, options.threshold));
  }
  return make_report(std::move(names), std::move(per_image));
}

std::string robustness_csv(const TBFormerParams& params, const ModelConfig& cfg,
                           const Manifest& manifest,
                           const std::vector<DistortSpec>& specs,
                           const EvalOptions& options) {
  auto auc_of = [&](const DistortSpec& d) {
    EvalOptions opt = options;
    opt.distort = d;
    MetricsReport report = evaluate_manifest(params, cfg, manifest, opt);
    return report.aggregate.auc;
  };

  char buf[64];
  std::ostringstream out;
  out << "distortion,auc,auc_delta\n";
  const auto baseline = auc_of(DistortSpec{});
  if (baseline)
    std::snprintf(buf, sizeof(buf), "none,%.6f,%+.6f\n", *baseline, 0.0);
  else
    std::snprintf(buf, sizeof(buf), "none,,\n");
  out << buf;
  for (const auto& spec : specs) {
    if (spec.kind == DistortSpec::Kind::none) continue;  // baseline already emitted
    const auto auc = auc_of(spec);
    if (auc && baseline)
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%+.6f\n", distort_name(spec).c_str(),
                    *auc, *auc - *baseline);
    else if (auc)
      std::snprintf(buf, sizeof(buf), "%s,%.6f,\n", distort_name(spec).c_str(), *auc);
    else
      std::snprintf(buf, sizeof(buf), "%s,,\n", distort_name(spec).c_str());
    out << buf;
  }
  return out.str();
}

}  // namespace tbf
