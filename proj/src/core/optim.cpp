#include "optim.hpp"

#include <cmath>
#include <stdexcept>

namespace tbf {

double lr_at(std::size_t iter_current, const ScheduleConfig& cfg) {
  if (cfg.lr0 <= 0.0) throw std::invalid_argument("schedule: lr0 must be positive");
  if (cfg.iter_total < 1) throw std::invalid_argument("schedule: iter_total must be >= 1");
  if (iter_current > cfg.iter_total)
    throw std::out_of_range("schedule: iteration " + std::to_string(iter_current) +
                            " past iter_total " + std::to_string(cfg.iter_total));
  const double base = 1.0 - static_cast<double>(iter_current) / static_cast<double>(cfg.iter_total);
  return cfg.lr0 * std::pow(base, cfg.power);
}

SgdState::SgdState(const std::vector<std::pair<std::string, Tensor>>& params) : params_(params) {
  velocity_.reserve(params_.size());
  for (const auto& [name, t] : params_) velocity_.emplace_back(t.size(), 0.0);
}

std::vector<double>& SgdState::velocity(const std::string& name) {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].first == name) return velocity_[i];
  throw std::invalid_argument("sgd: no momentum buffer for '" + name + "'");
}

void SgdState::step(double lr, double momentum, BayarParams* bayar, double clip_norm) {
  for (const auto& [name, t] : params_)
    if (!t.has_grad())
      throw std::runtime_error("sgd_step: parameter '" + name + "' has no gradient");

  double scale = 1.0;
  if (clip_norm > 0.0) {
    double sq = 0.0;
    for (const auto& [name, t] : params_)
      for (double g : t.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) scale = clip_norm / norm;
  }

  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& t = params_[i].second;
    const auto& g = t.grad();
    auto& v = velocity_[i];
    auto& p = t.mutable_data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      v[j] = snap32(momentum * v[j] + g[j] * scale);
      p[j] = snap32(p[j] - lr * v[j]);
    }
  }

  if (bayar) {
    bayar_reproject(*bayar);
    snap_f32(bayar->kernels);
  }
}

}  // namespace tbf
