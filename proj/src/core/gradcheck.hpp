#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tensor.hpp"

namespace tbf {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  // Entries sorted worst-first; count capped by the caller's needs.
  std::vector<GradCheckEntry> worst(std::size_t count) const;
};

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

double grad_check_rel_err(double a, double b);

// Compares backward() grads of the scalar-valued f against central finite
// differences (f(p+eps) - f(p-eps)) / (2 eps), per parameter element.
// f must be deterministic and rebuild its forward pass on every call.
GradCheckReport grad_check(const std::function<Tensor()>& f, const NamedParams& params, double eps);

}  // namespace tbf
