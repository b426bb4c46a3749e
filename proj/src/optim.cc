#include "ftm/optim.h"

#include <cmath>

#include "ftm/errors.h"

namespace ftm {

template <typename T>
double global_grad_norm(const std::vector<Tensor<T>*>& grads) {
  double sq = 0;
  for (const Tensor<T>* g : grads)
    if (g)
      for (T v : g->flat()) sq += static_cast<double>(v) * v;
  return std::sqrt(sq);
}

template <typename T>
double grad_clip_by_global_norm(std::vector<Tensor<T>*> grads, double max_norm) {
  if (!(max_norm > 0)) throw ConfigError("clip norm must be positive");
  const double norm = global_grad_norm(grads);
  if (norm > max_norm) {
    const T factor = static_cast<T>(max_norm / norm);
    for (Tensor<T>* g : grads)
      if (g)
        for (T& v : g->flat()) v *= factor;
  }
  return norm;
}

template <typename T>
void Adam<T>::step(ParamSet<T>& params, const std::vector<bool>* skip) {
  auto& items = params.items();
  if (m_.empty()) {
    for (const auto& item : items) {
      m_.emplace_back(item.second.rows(), item.second.cols());
      v_.emplace_back(item.second.rows(), item.second.cols());
    }
  }
  for (const auto& [name, var] : items)
    if (var.has_grad() && !var.grad().all_finite())
      throw NumericError("non-finite gradient for parameter " + name);
  ++t_;
  const double b1 = opts_.beta1, b2 = opts_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (skip && (*skip)[i]) continue;
    Var<T> var = items[i].second;
    Tensor<T>& w = var.mutable_value();
    Tensor<double>& m = m_[i];
    Tensor<double>& v = v_[i];
    if (!var.has_grad()) {
      // Untouched this step: no update, moments decay.
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] *= b1;
        v[j] *= b2;
      }
      continue;
    }
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double g = static_cast<double>(var.grad()[j]);
      m[j] = b1 * m[j] + (1 - b1) * g;
      v[j] = b2 * v[j] + (1 - b2) * g * g;
      w[j] = static_cast<T>(w[j] - opts_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + opts_.eps));
    }
  }
}

template double global_grad_norm(const std::vector<Tensor<float>*>&);
template double global_grad_norm(const std::vector<Tensor<double>*>&);
template double grad_clip_by_global_norm(std::vector<Tensor<float>*>, double);
template double grad_clip_by_global_norm(std::vector<Tensor<double>*>, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace ftm
