// Ordered set of named trainable tensors, the unit that is checkpointed and
// optimized.

#ifndef FTM_PARAMS_H_
#define FTM_PARAMS_H_

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ftm/autodiff.h"
#include "ftm/checkpoint.h"

namespace ftm {

template <typename T>
class ParamSet {
 public:
  using Item = std::pair<std::string, Var<T>>;

  // Registers a parameter; names must be unique.
  Var<T> add(const std::string& name, Tensor<T> init);
  const Var<T>& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<Item>& items() const { return items_; }
  std::size_t num_scalars() const;
  void zero_grad();

  void save_to(Checkpoint& ck) const;
  // Copies values in place. Every parameter must be present with the same
  // shape; extra checkpoint entries are ignored.
  void load_from(const Checkpoint& ck);
  // As load_from, restricted to parameters whose names start with one of the
  // prefixes. Returns the number of tensors copied.
  int load_matching(const Checkpoint& ck, const std::vector<std::string>& prefixes);

 private:
  std::vector<Item> items_;
};

// Uniform(-bound, bound) fill.
template <typename T>
Tensor<T> uniform_tensor(int rows, int cols, double bound, std::mt19937_64& rng);

// Glorot uniform for a fan_in x fan_out weight.
template <typename T>
Tensor<T> glorot(int fan_in, int fan_out, std::mt19937_64& rng);

}  // namespace ftm

#endif  // FTM_PARAMS_H_
