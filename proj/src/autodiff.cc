#include "ftm/autodiff.h"

#include <unordered_set>

#include "ftm/errors.h"

namespace ftm {
namespace {

thread_local bool g_grad_enabled = true;
thread_local bool g_debug_checks = false;

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void set_debug_checks(bool on) { g_debug_checks = on; }
bool debug_checks() { return g_debug_checks; }

template <typename T>
Tensor<T>& Node<T>::grad_buffer() {
  if (grad.empty()) grad = Tensor<T>(value.rows(), value.cols());
  return grad;
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->op = "parameter";
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = "constant";
  return Var<T>(std::move(node));
}

template <typename T>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> inputs,
               std::function<void(Node<T>&)> backward_fn) {
  if (g_debug_checks && !value.all_finite())
    throw NumericError(std::string("non-finite value produced by op '") + op + "'");
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  node->op = op;
  if (g_grad_enabled) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->parents.reserve(inputs.size());
      for (auto& in : inputs) node->parents.push_back(in.node_ptr());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Var<T>(std::move(node));
}

template <typename T>
void backward(const Var<T>& loss) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw ShapeError("backward: loss must be 1x1, got " + loss.value().shape_str());
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss.node(), 0);
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node<T>* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer().fill(T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) {
      n->backward_fn(*n);
      if (g_debug_checks) {
        for (auto& p : n->parents) {
          if (!p->grad.empty() && !p->grad.all_finite())
            throw NumericError(std::string("non-finite gradient from op '") +
                               n->op + "'");
        }
      }
    }
  }
}

template struct Node<float>;
template struct Node<double>;
template Var<float> parameter(Tensor<float>);
template Var<double> parameter(Tensor<double>);
template Var<float> constant(Tensor<float>);
template Var<double> constant(Tensor<double>);
template void backward(const Var<float>&);
template void backward(const Var<double>&);
template Var<float> make_op(const char*, Tensor<float>, std::vector<Var<float>>,
                            std::function<void(Node<float>&)>);
template Var<double> make_op(const char*, Tensor<double>, std::vector<Var<double>>,
                             std::function<void(Node<double>&)>);

}  // namespace ftm
