#include "ftm/tensor.h"

#include <algorithm>
#include <cmath>

#include "ftm/errors.h"
#include "ftm/ledger.h"

namespace ftm {

template <typename T>
Tensor<T>::Buffer::Buffer(std::size_t count) : data(new T[count]()), n(count) {
  AllocationLedger::current().on_alloc(n * sizeof(T));
}

template <typename T>
Tensor<T>::Buffer::~Buffer() {
  AllocationLedger::current().on_free(n * sizeof(T));
}

template <typename T>
Tensor<T>::Tensor(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw ShapeError("negative tensor dimension");
  if (size() > 0) buf_ = std::make_shared<Buffer>(size());
}

template <typename T>
Tensor<T>::Tensor(int rows, int cols, T fill_value) : Tensor(rows, cols) {
  fill(fill_value);
}

template <typename T>
Tensor<T> Tensor<T>::from(int rows, int cols, const std::vector<T>& values) {
  Tensor t(rows, cols);
  if (values.size() != t.size())
    throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                     " values for shape " + t.shape_str());
  std::copy(values.begin(), values.end(), t.data());
  return t;
}

template <typename T>
std::string Tensor<T>::shape_str() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor t(rows_, cols_);
  if (size()) std::copy(data(), data() + size(), t.data());
  return t;
}

template <typename T>
void Tensor<T>::fill(T v) {
  if (size()) std::fill(data(), data() + size(), v);
}

template <typename T>
bool Tensor<T>::all_finite() const {
  return std::all_of(data(), data() + size(),
                     [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> cast_tensor(const Tensor<float>& src) {
  Tensor<T> out(src.rows(), src.cols());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<T>(src[i]);
  return out;
}

template <typename T>
Tensor<T> cast_tensor(const Tensor<double>& src) {
  Tensor<T> out(src.rows(), src.cols());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = static_cast<T>(src[i]);
  return out;
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> cast_tensor<float>(const Tensor<float>&);
template Tensor<float> cast_tensor<float>(const Tensor<double>&);
template Tensor<double> cast_tensor<double>(const Tensor<float>&);
template Tensor<double> cast_tensor<double>(const Tensor<double>&);

}  // namespace ftm
