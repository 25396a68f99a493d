#include "metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tbf {
namespace {

void validate_pair(const Tensor& pred, const Tensor& gt, const char* who) {
  if (pred.shape() != gt.shape())
    throw std::invalid_argument(std::string(who) + ": pred shape " +
                                shape_str(pred.shape()) + " != gt shape " +
                                shape_str(gt.shape()));
  for (double v : gt.data())
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument(std::string(who) + ": gt must be binary {0,1}");
  for (double v : pred.data())
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument(std::string(who) + ": pred values must be in [0,1]");
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

ConfusionCounts confusion_counts(const Tensor& pred_prob, const Tensor& gt,
                                 double threshold) {
  validate_pair(pred_prob, gt, "confusion_counts");
  ConfusionCounts c;
  const auto& p = pred_prob.data();
  const auto& g = gt.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool pos = p[i] >= threshold;
    const bool truth = g[i] == 1.0;
    if (pos && truth)
      ++c.tp;
    else if (pos && !truth)
      ++c.fp;
    else if (!pos && truth)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

ImageMetrics metrics_from_counts(const ConfusionCounts& c) {
  ImageMetrics m;
  if (c.tp + c.fn == 0 && c.tp + c.fp == 0) {
    m.precision = m.recall = m.f1 = m.iou = 1.0;
    return m;
  }
  const double tp = static_cast<double>(c.tp);
  m.precision = c.tp + c.fp > 0 ? tp / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? tp / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  m.iou = c.tp + c.fp + c.fn > 0 ? tp / static_cast<double>(c.tp + c.fp + c.fn) : 0.0;
  return m;
}

ImageMetrics binary_metrics(const Tensor& pred_prob, const Tensor& gt,
                            double threshold) {
  ImageMetrics m = metrics_from_counts(confusion_counts(pred_prob, gt, threshold));
  m.auc = auc_score(pred_prob, gt);
  return m;
}

std::optional<double> auc_score(const Tensor& pred_prob, const Tensor& gt) {
  validate_pair(pred_prob, gt, "auc_score");
  const auto& p = pred_prob.data();
  const auto& g = gt.data();
  const std::size_t n = p.size();
  std::uint64_t n_pos = 0;
  for (double v : g) n_pos += v == 1.0 ? 1 : 0;
  const std::uint64_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  // Doubled midranks keep everything in integers: a tie run occupying 1-based
  // ranks lo..hi contributes lo+hi per member.
  std::uint64_t doubled_rank_sum = 0;  // over forged pixels
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && p[order[j]] == p[order[i]]) ++j;
    const std::uint64_t doubled_midrank = static_cast<std::uint64_t>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (g[order[k]] == 1.0) doubled_rank_sum += doubled_midrank;
    i = j;
  }
  const std::uint64_t doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(doubled_u) /
         (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsReport make_report(std::vector<std::string> names,
                          std::vector<ImageMetrics> per_image) {
  if (per_image.empty())
    throw std::invalid_argument("make_report: need at least one image");
  if (names.size() != per_image.size())
    throw std::invalid_argument("make_report: one name per image required");
  MetricsReport report;
  report.names = std::move(names);
  report.per_image = std::move(per_image);
  double auc_sum = 0.0;
  std::size_t auc_n = 0;
  for (const auto& m : report.per_image) {
    report.aggregate.precision += m.precision;
    report.aggregate.recall += m.recall;
    report.aggregate.f1 += m.f1;
    report.aggregate.iou += m.iou;
    if (m.auc) {
      auc_sum += *m.auc;
      ++auc_n;
    }
  }
  const double count = static_cast<double>(report.per_image.size());
  report.aggregate.precision /= count;
  report.aggregate.recall /= count;
  report.aggregate.f1 /= count;
  report.aggregate.iou /= count;
  if (auc_n > 0) report.aggregate.auc = auc_sum / static_cast<double>(auc_n);
  report.auc_skipped = report.per_image.size() - auc_n;
  return report;
}

std::string report_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "image,precision,recall,f1,iou,auc\n";
  auto row = [&](const std::string& name, const ImageMetrics& m) {
    out << name << ',' << format_metric(m.precision) << ',' << format_metric(m.recall)
        << ',' << format_metric(m.f1) << ',' << format_metric(m.iou) << ',';
    if (m.auc) out << format_metric(*m.auc);
    out << '\n';
  };
  for (std::size_t i = 0; i < report.per_image.size(); ++i)
    row(report.names[i], report.per_image[i]);
  row("aggregate", report.aggregate);
  return out.str();
}

std::string report_summary(const MetricsReport& report) {
  std::ostringstream out;
  out << report.per_image.size() << " image(s): precision "
      << format_metric(report.aggregate.precision) << ", recall "
      << format_metric(report.aggregate.recall) << ", f1 "
      << format_metric(report.aggregate.f1) << ", iou "
      << format_metric(report.aggregate.iou) << ", auc ";
  if (report.aggregate.auc)
    out << format_metric(*report.aggregate.auc);
  else
    out << "undefined";
  if (report.auc_skipped > 0)
    out << " (" << report.auc_skipped << " single-class image(s) skipped for auc)";
  return out.str();
}

}  // namespace tbf
