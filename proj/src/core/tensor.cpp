#include "tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace tbf {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

static std::shared_ptr<TensorImpl> make_impl(Shape shape, std::vector<double> data) {
  for (std::size_t e : shape) {
    if (e == 0) throw std::invalid_argument("tensor: zero extent in shape " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("tensor: shape " + shape_str(shape) + " does not match " +
                                std::to_string(data.size()) + " elements");
  }
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return impl;
}

Tensor Tensor::zeros(Shape shape) {
  std::size_t n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(n, 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(n, value)));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  return Tensor(make_impl(std::move(shape), std::move(data)));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t = from_data(std::move(shape), std::move(data));
  t.impl_->requires_grad = true;
  t.impl_->is_leaf = true;
  return t;
}

const std::vector<double>& Tensor::grad() const {
  if (!impl_->grad) throw std::runtime_error("tensor: grad accessed but never populated");
  return *impl_->grad;
}

double Tensor::item() const {
  if (size() != 1) throw std::runtime_error("tensor: item() on non-scalar shape " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != rank()) throw std::runtime_error("tensor: at() rank mismatch");
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : idx) {
    if (i >= impl_->shape[axis]) throw std::runtime_error("tensor: at() index out of range");
    off = off * impl_->shape[axis] + i;
    ++axis;
  }
  return impl_->data[off];
}

bool Tensor::all_finite() const {
  for (double v : impl_->data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {
thread_local Tape* g_current_tape = nullptr;
}

Tape::Tape() {
  prev_ = g_current_tape;
  g_current_tape = this;
}

Tape::~Tape() { g_current_tape = prev_; }

Tape* Tape::current() { return g_current_tape; }

void Tape::backward(const Tensor& loss) {
  if (nodes_.empty()) throw std::logic_error("backward: tape is empty (no recorded operations)");
  if (consumed_) throw std::logic_error("backward: tape already swept; rebuild the forward pass first");
  if (!loss.defined() || loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                (loss.defined() ? shape_str(loss.shape()) : std::string("<null>")));
  }

  bool loss_on_tape = false;
  for (const auto& node : nodes_) {
    if (node.out.get() == loss.impl()) {
      loss_on_tape = true;
      break;
    }
  }
  if (!loss_on_tape) throw std::logic_error("backward: loss was not produced on this tape");

  consumed_ = true;

  std::unordered_map<TensorImpl*, std::vector<double>> buffers;
  buffers[loss.impl()] = {1.0};

  std::vector<std::vector<double>*> parent_ptrs;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto found = buffers.find(it->out.get());
    if (found == buffers.end()) continue;  // not on any path to the loss
    const std::vector<double>& gout = found->second;

    parent_ptrs.clear();
    for (const auto& p : it->parents) {
      auto [slot, inserted] = buffers.try_emplace(p.get());
      if (inserted) slot->second.assign(p->data.size(), 0.0);
      parent_ptrs.push_back(&slot->second);
    }
    it->backward_fn(gout, parent_ptrs);
  }

  for (const auto& node : nodes_) {
    for (const auto& p : node.parents) {
      if (!p->is_leaf || !p->requires_grad) continue;
      auto found = buffers.find(p.get());
      if (found == buffers.end()) continue;
      if (!p->grad) p->grad.emplace(p->data.size(), 0.0);
      auto& g = *p->grad;
      const auto& b = found->second;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += b[i];
      buffers.erase(found);  // each leaf accumulated once
    }
  }
}

Tensor make_op_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& parents,
                      std::function<void(const std::vector<double>&,
                                         const std::vector<std::vector<double>*>&)>
                          backward_fn) {
  auto impl = make_impl(std::move(shape), std::move(data));
  Tape* tape = Tape::current();
  bool wants_grad = false;
  for (const auto& p : parents) wants_grad = wants_grad || p.requires_grad();
  if (tape != nullptr && wants_grad) {
    impl->requires_grad = true;
    TapeNode node;
    node.out = impl;
    node.parents.reserve(parents.size());
    for (const auto& p : parents) node.parents.push_back(p.impl_ptr());
    node.backward_fn = std::move(backward_fn);
    tape->record(std::move(node));
  }
  return Tensor(std::move(impl));
}

}  // namespace tbf
