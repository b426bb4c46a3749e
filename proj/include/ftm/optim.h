// Gradient clipping and the Adam optimizer.

#ifndef FTM_OPTIM_H_
#define FTM_OPTIM_H_

#include <string>
#include <vector>

#include "ftm/params.h"

namespace ftm {

// Scales every gradient by max_norm / g when the global L2 norm g exceeds
// max_norm. Returns g (before clipping).
template <typename T>
double grad_clip_by_global_norm(std::vector<Tensor<T>*> grads, double max_norm);

template <typename T>
double global_grad_norm(const std::vector<Tensor<T>*>& grads);

struct AdamOptions {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  // One bias-corrected update of every parameter that has a gradient buffer
  // and is not marked in skip. Parameters without a gradient keep their value
  // while their moments decay. Throws NumericError naming the first
  // parameter with a non-finite gradient, before anything is modified.
  void step(ParamSet<T>& params, const std::vector<bool>* skip = nullptr);

  long steps() const { return t_; }
  const AdamOptions& options() const { return opts_; }

 private:
  AdamOptions opts_;
  long t_ = 0;
  std::vector<Tensor<double>> m_, v_;
};

}  // namespace ftm

#endif  // FTM_OPTIM_H_
