#include "ftm/params.h"

#include <cmath>

#include "ftm/errors.h"

namespace ftm {

template <typename T>
Var<T> ParamSet<T>::add(const std::string& name, Tensor<T> init) {
  if (contains(name)) throw std::logic_error("duplicate parameter " + name);
  items_.emplace_back(name, parameter(std::move(init)));
  return items_.back().second;
}

template <typename T>
const Var<T>& ParamSet<T>::get(const std::string& name) const {
  for (const auto& [n, v] : items_)
    if (n == name) return v;
  throw DataError("no parameter named '" + name + "'");
}

template <typename T>
bool ParamSet<T>::contains(const std::string& name) const {
  for (const auto& item : items_)
    if (item.first == name) return true;
  return false;
}

template <typename T>
std::size_t ParamSet<T>::num_scalars() const {
  std::size_t n = 0;
  for (const auto& item : items_) n += item.second.value().size();
  return n;
}

template <typename T>
void ParamSet<T>::zero_grad() {
  for (auto& item : items_) item.second.zero_grad();
}

template <typename T>
void ParamSet<T>::save_to(Checkpoint& ck) const {
  for (const auto& [name, v] : items_) ck.put(name, v.value());
}

namespace {

template <typename T>
void copy_checked(const Checkpoint& ck, const std::string& name, Var<T>& v) {
  if (!ck.contains(name)) throw DataError("checkpoint is missing parameter '" + name + "'");
  Tensor<T> t = ck.get<T>(name);
  Tensor<T>& dst = v.mutable_value();
  if (!t.same_shape(dst))
    throw DataError("checkpoint parameter '" + name + "' has shape " + t.shape_str() +
                    ", model expects " + dst.shape_str());
  std::copy(t.data(), t.data() + t.size(), dst.data());
}

}  // namespace

template <typename T>
void ParamSet<T>::load_from(const Checkpoint& ck) {
  for (auto& [name, v] : items_) copy_checked(ck, name, v);
}

template <typename T>
int ParamSet<T>::load_matching(const Checkpoint& ck, const std::vector<std::string>& prefixes) {
  int n = 0;
  for (auto& [name, v] : items_) {
    bool match = false;
    for (const auto& p : prefixes) match = match || name.rfind(p, 0) == 0;
    if (!match) continue;
    copy_checked(ck, name, v);
    ++n;
  }
  return n;
}

template <typename T>
Tensor<T> uniform_tensor(int rows, int cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<T> t(rows, cols);
  for (auto& x : t.flat()) x = static_cast<T>(u(rng));
  return t;
}

template <typename T>
Tensor<T> glorot(int fan_in, int fan_out, std::mt19937_64& rng) {
  return uniform_tensor<T>(fan_in, fan_out, std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

template class ParamSet<float>;
template class ParamSet<double>;
template Tensor<float> uniform_tensor(int, int, double, std::mt19937_64&);
template Tensor<double> uniform_tensor(int, int, double, std::mt19937_64&);
template Tensor<float> glorot(int, int, std::mt19937_64&);
template Tensor<double> glorot(int, int, std::mt19937_64&);

}  // namespace ftm
