#include "gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tbf {

std::vector<GradCheckEntry> GradCheckReport::worst(std::size_t count) const {
  std::vector<GradCheckEntry> sorted = entries;
  std::sort(sorted.begin(), sorted.end(),
            [](const GradCheckEntry& a, const GradCheckEntry& b) {
              return a.max_rel_err > b.max_rel_err;
            });
  if (sorted.size() > count) sorted.resize(count);
  return sorted;
}

double grad_check_rel_err(double a, double b) {
  const double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
  return std::fabs(a - b) / denom;
}

GradCheckReport grad_check(const std::function<Tensor()>& f, const NamedParams& params,
                           double eps) {
  if (eps <= 0.0) throw std::invalid_argument("grad_check: eps must be positive");

  for (const auto& [name, p] : params) {
    if (!p.defined() || !p.is_leaf()) {
      throw std::invalid_argument("grad_check: parameter '" + name + "' is not a leaf tensor");
    }
  }

  // Analytic pass.
  std::vector<std::vector<double>> analytic;
  {
    for (const auto& [name, p] : params) const_cast<Tensor&>(p).zero_grad();
    Tape tape;
    Tensor loss = f();
    if (!std::isfinite(loss.item())) throw std::runtime_error("grad_check: f produced a non-finite value");
    tape.backward(loss);
    analytic.reserve(params.size());
    for (const auto& [name, p] : params) {
      if (p.has_grad()) {
        analytic.push_back(p.grad());
      } else {
        analytic.emplace_back(p.size(), 0.0);  // parameter unused by f
      }
      const_cast<Tensor&>(p).zero_grad();
    }
  }

  auto eval = [&f]() {
    Tensor v = f();
    const double out = v.item();
    if (!std::isfinite(out)) throw std::runtime_error("grad_check: f produced a non-finite value");
    return out;
  };

  GradCheckReport report;
  report.entries.reserve(params.size());
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const auto& [name, p] = params[pi];
    auto& data = const_cast<Tensor&>(p).mutable_data();
    GradCheckEntry entry;
    entry.name = name;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + eps;
      const double f_plus = eval();
      data[i] = orig - eps;
      const double f_minus = eval();
      data[i] = orig;
      const double numeric = (f_plus - f_minus) / (2.0 * eps);
      const double rel = grad_check_rel_err(analytic[pi][i], numeric);
      if (rel >= entry.max_rel_err) {
        entry.max_rel_err = rel;
        entry.worst_index = i;
        entry.analytic_at_worst = analytic[pi][i];
        entry.numeric_at_worst = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace tbf
