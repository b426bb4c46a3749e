// Row-major real matrix with shared, ledger-accounted storage.
//
// Copies share storage (like a handle); clone() makes a deep copy. Vectors are
// stored as 1 x n. Only rank-2 shapes are used by the ops.

#ifndef FTM_TENSOR_H_
#define FTM_TENSOR_H_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ftm {

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols);  // zero-filled
  Tensor(int rows, int cols, T fill);
  static Tensor from(int rows, int cols, const std::vector<T>& values);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return static_cast<std::size_t>(rows_) * cols_; }
  std::size_t bytes() const { return size() * sizeof(T); }
  bool empty() const { return size() == 0; }
  std::string shape_str() const;
  bool same_shape(const Tensor& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  T* data() { return buf_ ? buf_->data.get() : nullptr; }
  const T* data() const { return buf_ ? buf_->data.get() : nullptr; }
  T& at(int r, int c) { return data()[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& at(int r, int c) const {
    return data()[static_cast<std::size_t>(r) * cols_ + c];
  }
  T& operator[](std::size_t i) { return data()[i]; }
  const T& operator[](std::size_t i) const { return data()[i]; }
  std::span<T> row(int r) {
    return {data() + static_cast<std::size_t>(r) * cols_,
            static_cast<std::size_t>(cols_)};
  }
  std::span<const T> row(int r) const {
    return {data() + static_cast<std::size_t>(r) * cols_,
            static_cast<std::size_t>(cols_)};
  }
  std::span<T> flat() { return {data(), size()}; }
  std::span<const T> flat() const { return {data(), size()}; }

  Tensor clone() const;
  void fill(T v);
  bool all_finite() const;

 private:
  struct Buffer {
    explicit Buffer(std::size_t n);
    ~Buffer();
    Buffer(const Buffer&) = delete;
    Buffer& operator=(const Buffer&) = delete;
    std::unique_ptr<T[]> data;
    std::size_t n;
  };

  int rows_ = 0;
  int cols_ = 0;
  std::shared_ptr<Buffer> buf_;
};

template <typename T>
Tensor<T> cast_tensor(const Tensor<float>& src);
template <typename T>
Tensor<T> cast_tensor(const Tensor<double>& src);

}  // namespace ftm

#endif  // FTM_TENSOR_H_
