#include "ftm/losses.h"

#include <cmath>
#include <limits>

#include "ftm/errors.h"
#include "ftm/ops.h"

namespace ftm {

template <typename T>
Var<T> frame_xe(const Var<T>& logits, int label, const std::vector<T>& weights) {
  if (label != 0 && label != 1)
    throw DataError("frame_xe: label must be 0 or 1, got " + std::to_string(label));
  if (logits.rows() < 1) throw ShapeError("frame_xe: no frames");
  if (logits.cols() != 2)
    throw ShapeError("frame_xe: expected 2 logits per frame, got " + logits.value().shape_str());
  return cross_entropy(logits, std::vector<int>(logits.rows(), label), weights);
}

int ctc_min_frames(const std::vector<int>& labels) {
  int n = static_cast<int>(labels.size());
  for (std::size_t i = 1; i < labels.size(); ++i) n += labels[i] == labels[i - 1];
  return n;
}

namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace

template <typename T>
Var<T> ctc_loss(const Var<T>& log_probs, const std::vector<int>& labels) {
  const int steps = log_probs.rows(), classes = log_probs.cols();
  if (labels.empty()) throw DataError("ctc_loss: empty label sequence");
  for (int l : labels)
    if (l < 1 || l >= classes)
      throw DataError("ctc_loss: label " + std::to_string(l) + " outside 1.." +
                      std::to_string(classes - 1));
  if (steps < ctc_min_frames(labels)) throw DataError("label longer than admissible alignment");

  // Blank-extended sequence: b l1 b l2 ... b.
  const int n = 2 * static_cast<int>(labels.size()) + 1;
  std::vector<int> ext(n, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) ext[2 * i + 1] = labels[i];
  auto can_skip = [&](int s) { return s >= 2 && ext[s] != 0 && ext[s] != ext[s - 2]; };

  const double ninf = -std::numeric_limits<double>::infinity();
  const Tensor<T>& lp = log_probs.value();
  auto emit = [&](int t, int s) { return static_cast<double>(lp.at(t, ext[s])); };

  // alpha includes the emission at t; beta covers frames after t.
  std::vector<double> alpha(static_cast<std::size_t>(steps) * n, ninf);
  std::vector<double> beta(static_cast<std::size_t>(steps) * n, ninf);
  auto A = [&](int t, int s) -> double& { return alpha[static_cast<std::size_t>(t) * n + s]; };
  auto B = [&](int t, int s) -> double& { return beta[static_cast<std::size_t>(t) * n + s]; };

  A(0, 0) = emit(0, 0);
  if (n > 1) A(0, 1) = emit(0, 1);
  for (int t = 1; t < steps; ++t)
    for (int s = 0; s < n; ++s) {
      double a = A(t - 1, s);
      if (s >= 1) a = log_add(a, A(t - 1, s - 1));
      if (can_skip(s)) a = log_add(a, A(t - 1, s - 2));
      if (a != ninf) A(t, s) = a + emit(t, s);
    }
  const double log_p = log_add(A(steps - 1, n - 1), A(steps - 1, n - 2));
  if (!std::isfinite(log_p)) throw NumericError("ctc_loss: alignment probability underflow");

  B(steps - 1, n - 1) = 0;
  B(steps - 1, n - 2) = 0;
  for (int t = steps - 2; t >= 0; --t)
    for (int s = 0; s < n; ++s) {
      double b = B(t + 1, s) + emit(t + 1, s);
      if (s + 1 < n) b = log_add(b, B(t + 1, s + 1) + emit(t + 1, s + 1));
      if (s + 2 < n && can_skip(s + 2)) b = log_add(b, B(t + 1, s + 2) + emit(t + 1, s + 2));
      B(t, s) = b;
    }

  // d(-log p)/d lp[t][k] = -sum over states s with ext[s] == k of the state
  // occupancy at t.
  Tensor<T> dlp(steps, classes);
  for (int t = 0; t < steps; ++t)
    for (int s = 0; s < n; ++s) {
      const double a = A(t, s), b = B(t, s);
      if (a == ninf || b == ninf) continue;
      dlp.at(t, ext[s]) -= static_cast<T>(std::exp(a + b - log_p));
    }

  Tensor<T> out(1, 1, static_cast<T>(-log_p));
  return make_op<T>("ctc_loss", std::move(out), {log_probs}, [dlp](Node<T>& self) {
    Node<T>& p = *self.parents[0];
    if (!p.requires_grad) return;
    Tensor<T>& g = p.grad_buffer();
    const T up = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up * dlp[i];
  });
}

template <typename T>
Var<T> multitask_loss(const Var<T>& xe, const Var<T>& ctc, T lambda_ctc) {
  if (!(lambda_ctc >= 0)) throw ConfigError("lambda_ctc must be non-negative");
  if (lambda_ctc == T(0)) return xe;
  return add(xe, scale(ctc, lambda_ctc));
}

#define FTM_INSTANTIATE(T)                                                         \
  template Var<T> frame_xe(const Var<T>&, int, const std::vector<T>&);             \
  template Var<T> ctc_loss(const Var<T>&, const std::vector<int>&);                \
  template Var<T> multitask_loss(const Var<T>&, const Var<T>&, T);

FTM_INSTANTIATE(float)
FTM_INSTANTIATE(double)
#undef FTM_INSTANTIATE

}  // namespace ftm
