#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tbf {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  bool is_leaf = false;
  std::optional<std::vector<double>> grad;  // populated on leaves by backward()
};

// Dense row-major f64 tensor. Values are immutable once produced by an op;
// leaves (parameters) may be mutated by their owner between tapes.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> data);
  static Tensor scalar(double value);
  // Trainable leaf: participates in grad recording.
  static Tensor parameter(Shape shape, std::vector<double> data);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->data.size(); }
  std::size_t extent(std::size_t axis) const { return impl_->shape[axis]; }

  const std::vector<double>& data() const { return impl_->data; }
  // Leaf mutation only (optimizer steps, gradcheck perturbations).
  std::vector<double>& mutable_data() { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  bool is_leaf() const { return impl_->is_leaf; }
  bool has_grad() const { return impl_->grad.has_value(); }
  const std::vector<double>& grad() const;
  void zero_grad() { impl_->grad.reset(); }

  double item() const;
  double at(std::initializer_list<std::size_t> idx) const;

  bool all_finite() const;

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
  friend Tensor make_op_result(Shape, std::vector<double>, const std::vector<Tensor>&,
                               std::function<void(const std::vector<double>&,
                                                  const std::vector<std::vector<double>*>&)>);
};

struct TapeNode {
  std::shared_ptr<TensorImpl> out;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Accumulates d(loss)/d(parent) into the per-parent buffers, given
  // d(loss)/d(out).
  std::function<void(const std::vector<double>& gout,
                     const std::vector<std::vector<double>*>& parent_grads)>
      backward_fn;
};

// Wengert list recorded by ops while the tape is the thread's active one.
// Construction activates the tape on the current thread, destruction
// restores the previous one. Single-threaded per instance; independent
// tapes may live on different threads.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Reverse sweep from a scalar loss; fills grad on every requires_grad
  // leaf reachable from it. A tape can be swept once.
  void backward(const Tensor& loss);

  bool empty() const { return nodes_.empty(); }
  std::size_t size() const { return nodes_.size(); }

  static Tape* current();
  void record(TapeNode node) { nodes_.push_back(std::move(node)); }

 private:
  std::vector<TapeNode> nodes_;
  bool consumed_ = false;
  Tape* prev_ = nullptr;
};

// Result construction used by every op: records a node on the active tape
// when any parent requires grad.
Tensor make_op_result(Shape shape, std::vector<double> data, const std::vector<Tensor>& parents,
                      std::function<void(const std::vector<double>&,
                                         const std::vector<std::vector<double>*>&)>
                          backward_fn);

// Parameters and optimizer state are kept on the f32 grid so that the f32
// checkpoint format round-trips bit-exactly (compute stays f64).
inline double snap32(double v) { return static_cast<double>(static_cast<float>(v)); }

inline void snap_f32(Tensor& t) {
  for (auto& v : t.mutable_data()) v = snap32(v);
}

}  // namespace tbf
