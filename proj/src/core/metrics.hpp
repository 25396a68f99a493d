#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace tbf {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Binarizes pred at threshold (>= is forged) against a {0,1} ground truth.
ConfusionCounts confusion_counts(const Tensor& pred_prob, const Tensor& gt,
                                 double threshold);

struct ImageMetrics {
  double precision = 0.0, recall = 0.0, f1 = 0.0, iou = 0.0;
  std::optional<double> auc;  // undefined when gt is single-class
};

// Conventions: empty gt with empty prediction scores 1 across the board; any
// other zero denominator scores 0.
ImageMetrics metrics_from_counts(const ConfusionCounts& counts);

ImageMetrics binary_metrics(const Tensor& pred_prob, const Tensor& gt,
                            double threshold = 0.5);

// Pixel ROC AUC by the rank statistic: P(score_forged > score_authentic)
// + 0.5 * P(tie). Ties share midranks, so the result matches brute-force
// pair enumeration exactly.
std::optional<double> auc_score(const Tensor& pred_prob, const Tensor& gt);

struct MetricsReport {
  std::vector<std::string> names;  // one label per scored image
  std::vector<ImageMetrics> per_image;
  ImageMetrics aggregate;     // unweighted means; auc over defined images only
  std::size_t auc_skipped = 0;
};

// Aggregates per-image records; errors on empty input.
MetricsReport make_report(std::vector<std::string> names,
                          std::vector<ImageMetrics> per_image);

// Header + one row per image + final "aggregate" row; AUC cell empty when
// undefined.
std::string report_csv(const MetricsReport& report);
std::string report_summary(const MetricsReport& report);

}  // namespace tbf
