#pragma once

#include <string>
#include <utility>
#include <vector>

#include "bayar.hpp"
#include "tensor.hpp"

namespace tbf {

struct ScheduleConfig {
  double lr0 = 0.001;
  std::size_t iter_total = 1;
  double power = 0.9;
  double momentum = 0.9;
  std::size_t batch_size = 8;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
};

// lr0 * (1 - t/T)^power; t outside [0, T] is an error.
double lr_at(std::size_t iter_current, const ScheduleConfig& cfg);

// Momentum buffers, one per stepped parameter, registered by name in step
// order. Values live on the f32 grid like the parameters themselves.
class SgdState {
 public:
  explicit SgdState(const std::vector<std::pair<std::string, Tensor>>& params);

  // v <- momentum*v + g; p <- p - lr*v; snap both to f32; reproject Bayar
  // kernels afterwards when `bayar` is given. Throws if any parameter is
  // missing its gradient.
  void step(double lr, double momentum, BayarParams* bayar, double clip_norm = 0.0);

  const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
  std::vector<double>& velocity(const std::string& name);

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace tbf
