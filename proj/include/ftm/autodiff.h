// Tape-free reverse-mode differentiation over Tensor values.
//
// Each op returns a Var whose node keeps its parents and a closure that
// propagates the node's gradient to them. backward() walks the graph in
// reverse topological order. With grad mode off (NoGradGuard) ops keep no
// parents, so intermediates are released as soon as their handles die.

#ifndef FTM_AUTODIFF_H_
#define FTM_AUTODIFF_H_

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ftm/tensor.h"

namespace ftm {

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  // Gradient buffer, allocated on first use.
  Tensor<T>& grad_buffer();
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  int rows() const { return node_->value.rows(); }
  int cols() const { return node_->value.cols(); }
  const char* op() const { return node_->op; }
  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

  void zero_grad() { node_->grad = Tensor<T>(); }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
Var<T> parameter(Tensor<T> value);
template <typename T>
Var<T> constant(Tensor<T> value);

// Runs reverse-mode accumulation from a 1x1 scalar.
template <typename T>
void backward(const Var<T>& loss);

// Low-level: creates the result node of an op. The closure receives the result
// node and must push gradients into node.parents[i]->grad_buffer() for every
// parent that requires grad.
template <typename T>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> inputs,
               std::function<void(Node<T>&)> backward_fn);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// When enabled, every op checks its output for NaN/Inf and throws
// NumericError naming the op.
void set_debug_checks(bool on);
bool debug_checks();

}  // namespace ftm

#endif  // FTM_AUTODIFF_H_
