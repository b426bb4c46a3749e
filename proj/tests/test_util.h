#ifndef FTM_TESTS_TEST_UTIL_H_
#define FTM_TESTS_TEST_UTIL_H_

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ftm/autodiff.h"
#include "ftm/ops.h"

namespace ftm::testing {

template <typename T>
Tensor<T> random_tensor(int rows, int cols, std::mt19937_64& rng, double lo = -1.0,
                        double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(rows, cols);
  for (auto& v : t.flat()) v = static_cast<T>(u(rng));
  return t;
}

inline double max_abs_diff(const Tensor<float>& a, const Tensor<float>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

inline double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct GradCheckResult {
  double worst_relative_error = 0;
  int worst_input = -1;
};

// Central finite differences on L = sum(f(inputs) * R) for a fixed random R.
// Relative error per input is ||analytic - numeric|| / max(||analytic||,
// ||numeric||, 1e-12).
inline GradCheckResult grad_check(
    std::vector<Var<double>> inputs,
    const std::function<Var<double>(const std::vector<Var<double>>&)>& fn,
    std::uint64_t seed = 7, double step = 1e-5) {
  std::mt19937_64 rng(seed);
  Var<double> probe = fn(inputs);
  auto weights = constant(random_tensor<double>(probe.rows(), probe.cols(), rng));
  auto objective = [&]() {
    return sum_all(mul(fn(inputs), weights));
  };
  for (auto& in : inputs) in.zero_grad();
  backward(objective());

  GradCheckResult res;
  for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
    auto& in = inputs[idx];
    if (!in.requires_grad()) continue;
    Tensor<double>& x = in.mutable_value();
    double num_sq = 0, ana_sq = 0, diff_sq = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      double plus, minus;
      {
        NoGradGuard ng;
        x[i] = orig + step;
        plus = objective().value()[0];
        x[i] = orig - step;
        minus = objective().value()[0];
        x[i] = orig;
      }
      const double numeric = (plus - minus) / (2 * step);
      const double analytic = in.has_grad() ? in.grad()[i] : 0.0;
      num_sq += numeric * numeric;
      ana_sq += analytic * analytic;
      diff_sq += (numeric - analytic) * (numeric - analytic);
    }
    const double denom = std::max({std::sqrt(num_sq), std::sqrt(ana_sq), 1e-12});
    const double rel = std::sqrt(diff_sq) / denom;
    if (rel > res.worst_relative_error) {
      res.worst_relative_error = rel;
      res.worst_input = static_cast<int>(idx);
    }
  }
  return res;
}

}  // namespace ftm::testing

#endif  // FTM_TESTS_TEST_UTIL_H_
