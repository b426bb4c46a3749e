#include "ftm/ops.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "ftm/errors.h"
#include "ftm/kernels.h"

namespace ftm {
namespace {

template <typename T>
Tensor<T>* grad_of(Node<T>& n, std::size_t i) {
  auto& p = *n.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

template <typename T>
const Tensor<T>& val(Node<T>& n, std::size_t i) {
  return n.parents[i]->value;
}

[[noreturn]] void shape_fail(const std::string& op, const std::string& a,
                             const std::string& b) {
  throw ShapeError(op + ": incompatible shapes " + a + " and " + b);
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < src.size(); ++i) d[i] += s[i];
}

template <typename T>
T sigmoid_scalar(T x) {
  return x >= 0 ? T(1) / (T(1) + std::exp(-x))
                : std::exp(x) / (T(1) + std::exp(x));
}

}  // namespace

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  if (a.cols() != b.rows())
    shape_fail("matmul", a.value().shape_str(), b.value().shape_str());
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor<T> out(m, n);
  kernels::gemm_nn(m, n, k, a.value().data(), k, b.value().data(), n,
                   out.data(), n, false);
  return make_op<T>("matmul", std::move(out), {a, b}, [m, k, n](Node<T>& self) {
    const Tensor<T>& g = self.grad;
    if (auto* da = grad_of(self, 0))  // dA = dC B^T
      kernels::gemm_nt(m, k, n, g.data(), n, val(self, 1).data(), n, da->data(),
                       k, true);
    if (auto* db = grad_of(self, 1))  // dB = A^T dC
      kernels::gemm_tn(k, n, m, val(self, 0).data(), k, g.data(), n, db->data(),
                       n, true);
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (!a.value().same_shape(b.value()))
    shape_fail("add", a.value().shape_str(), b.value().shape_str());
  Tensor<T> out = a.value().clone();
  add_into(out, b.value());
  return make_op<T>("add", std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* da = grad_of(self, 0)) add_into(*da, self.grad);
    if (auto* db = grad_of(self, 1)) add_into(*db, self.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  if (!a.value().same_shape(b.value()))
    shape_fail("sub", a.value().shape_str(), b.value().shape_str());
  Tensor<T> out = a.value().clone();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_op<T>("sub", std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* da = grad_of(self, 0)) add_into(*da, self.grad);
    if (auto* db = grad_of(self, 1))
      for (std::size_t i = 0; i < db->size(); ++i) (*db)[i] -= self.grad[i];
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  if (!a.value().same_shape(b.value()))
    shape_fail("mul", a.value().shape_str(), b.value().shape_str());
  Tensor<T> out = a.value().clone();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_op<T>("mul", std::move(out), {a, b}, [](Node<T>& self) {
    const auto& g = self.grad;
    if (auto* da = grad_of(self, 0))
      for (std::size_t i = 0; i < g.size(); ++i) (*da)[i] += g[i] * val(self, 1)[i];
    if (auto* db = grad_of(self, 1))
      for (std::size_t i = 0; i < g.size(); ++i) (*db)[i] += g[i] * val(self, 0)[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value().clone();
  for (auto& v : out.flat()) v *= factor;
  return make_op<T>("scale", std::move(out), {a}, [factor](Node<T>& self) {
    if (auto* da = grad_of(self, 0))
      kernels::axpy(da->size(), factor, self.grad.data(), da->data());
  });
}

template <typename T>
Var<T> add_bias(const Var<T>& x, const Var<T>& b) {
  if (b.rows() != 1 || b.cols() != x.cols())
    shape_fail("add_bias", x.value().shape_str(), b.value().shape_str());
  Tensor<T> out = x.value().clone();
  const int rows = out.rows(), cols = out.cols();
  for (int r = 0; r < rows; ++r) {
    T* o = out.data() + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) o[c] += b.value()[c];
  }
  return make_op<T>("add_bias", std::move(out), {x, b}, [rows, cols](Node<T>& self) {
    if (auto* dx = grad_of(self, 0)) add_into(*dx, self.grad);
    if (auto* db = grad_of(self, 1))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) (*db)[c] += self.grad.at(r, c);
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  if (x.cols() != w.rows())
    shape_fail("linear", x.value().shape_str(), w.value().shape_str());
  const bool has_bias = static_cast<bool>(b);
  if (has_bias && (b.rows() != 1 || b.cols() != w.cols()))
    shape_fail("linear(bias)", w.value().shape_str(), b.value().shape_str());
  const int m = x.rows(), k = x.cols(), n = w.cols();
  Tensor<T> out(m, n);
  if (has_bias)
    for (int r = 0; r < m; ++r)
      std::copy(b.value().data(), b.value().data() + n,
                out.data() + static_cast<std::size_t>(r) * n);
  kernels::gemm_nn(m, n, k, x.value().data(), k, w.value().data(), n, out.data(),
                   n, has_bias);
  std::vector<Var<T>> inputs{x, w};
  if (has_bias) inputs.push_back(b);
  return make_op<T>("linear", std::move(out), std::move(inputs),
                    [m, k, n, has_bias](Node<T>& self) {
    const Tensor<T>& g = self.grad;
    if (auto* dx = grad_of(self, 0))
      kernels::gemm_nt(m, k, n, g.data(), n, val(self, 1).data(), n, dx->data(), k,
                       true);
    if (auto* dw = grad_of(self, 1))
      kernels::gemm_tn(k, n, m, val(self, 0).data(), k, g.data(), n, dw->data(), n,
                       true);
    if (has_bias)
      if (auto* db = grad_of(self, 2))
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < n; ++c) (*db)[c] += g.at(r, c);
  });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const int cols = parts[0].cols();
  int rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      shape_fail("concat_rows", parts[0].value().shape_str(), p.value().shape_str());
    rows += p.rows();
  }
  Tensor<T> out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + off);
    off += p.value().size();
  }
  return make_op<T>("concat_rows", std::move(out), parts, [](Node<T>& self) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const std::size_t n = self.parents[i]->value.size();
      if (auto* d = grad_of(self, i))
        for (std::size_t j = 0; j < n; ++j) (*d)[j] += self.grad[off + j];
      off += n;
    }
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const int rows = parts[0].rows();
  int cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      shape_fail("concat_cols", parts[0].value().shape_str(), p.value().shape_str());
    cols += p.cols();
  }
  Tensor<T> out(rows, cols);
  int c0 = 0;
  for (const auto& p : parts) {
    for (int r = 0; r < rows; ++r)
      std::copy(p.value().row(r).begin(), p.value().row(r).end(),
                out.data() + static_cast<std::size_t>(r) * cols + c0);
    c0 += p.cols();
  }
  return make_op<T>("concat_cols", std::move(out), parts, [rows, cols](Node<T>& self) {
    int c0 = 0;
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      const int pc = self.parents[i]->value.cols();
      if (auto* d = grad_of(self, i))
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < pc; ++c)
            d->at(r, c) += self.grad[static_cast<std::size_t>(r) * cols + c0 + c];
      c0 += pc;
    }
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& x, int begin, int end) {
  if (begin < 0 || end > x.rows() || begin >= end)
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for " + x.value().shape_str());
  const int cols = x.cols();
  Tensor<T> out(end - begin, cols);
  const T* src = x.value().data() + static_cast<std::size_t>(begin) * cols;
  std::copy(src, src + out.size(), out.data());
  return make_op<T>("slice_rows", std::move(out), {x}, [begin, cols](Node<T>& self) {
    if (auto* dx = grad_of(self, 0)) {
      T* d = dx->data() + static_cast<std::size_t>(begin) * cols;
      for (std::size_t i = 0; i < self.grad.size(); ++i) d[i] += self.grad[i];
    }
  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& x, int begin, int end) {
  if (begin < 0 || end > x.cols() || begin >= end)
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for " + x.value().shape_str());
  const int rows = x.rows(), width = end - begin;
  Tensor<T> out(rows, width);
  for (int r = 0; r < rows; ++r)
    std::copy(x.value().row(r).begin() + begin, x.value().row(r).begin() + end,
              out.data() + static_cast<std::size_t>(r) * width);
  return make_op<T>("slice_cols", std::move(out), {x},
                    [rows, begin, width](Node<T>& self) {
    if (auto* dx = grad_of(self, 0))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < width; ++c) dx->at(r, begin + c) += self.grad.at(r, c);
  });
}

template <typename T>
Var<T> take_rows(const Var<T>& x, const std::vector<int>& index) {
  if (index.empty()) throw ShapeError("take_rows: empty index");
  const int cols = x.cols();
  Tensor<T> out(static_cast<int>(index.size()), cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= x.rows())
      throw ShapeError("take_rows: index " + std::to_string(index[i]) +
                       " out of range for " + x.value().shape_str());
    std::copy(x.value().row(index[i]).begin(), x.value().row(index[i]).end(),
              out.data() + i * cols);
  }
  return make_op<T>("take_rows", std::move(out), {x}, [index, cols](Node<T>& self) {
    if (auto* dx = grad_of(self, 0))
      for (std::size_t i = 0; i < index.size(); ++i)
        for (int c = 0; c < cols; ++c)
          dx->at(index[i], c) += self.grad[i * cols + c];
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> out = x.value().clone();
  for (auto& v : out.flat()) v = v > T(0) ? v : T(0);
  return make_op<T>("relu", std::move(out), {x}, [](Node<T>& self) {
    if (auto* dx = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (self.value[i] > T(0)) (*dx)[i] += self.grad[i];
  });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out = x.value().clone();
  for (auto& v : out.flat()) v = sigmoid_scalar(v);
  return make_op<T>("sigmoid", std::move(out), {x}, [](Node<T>& self) {
    if (auto* dx = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const T s = self.value[i];
        (*dx)[i] += self.grad[i] * s * (T(1) - s);
      }
  });
}

template <typename T>
Var<T> tanh(const Var<T>& x) {
  Tensor<T> out = x.value().clone();
  for (auto& v : out.flat()) v = std::tanh(v);
  return make_op<T>("tanh", std::move(out), {x}, [](Node<T>& self) {
    if (auto* dx = grad_of(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const T y = self.value[i];
        (*dx)[i] += self.grad[i] * (T(1) - y * y);
      }
  });
}

template <typename T>
Var<T> softmax_rows(const Var<T>& x) {
  Tensor<T> out = x.value().clone();
  const int rows = out.rows(), cols = out.cols();
  for (int r = 0; r < rows; ++r) {
    auto row = out.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T sum = 0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    const T inv = T(1) / sum;
    for (auto& v : row) v *= inv;
  }
  return make_op<T>("softmax_rows", std::move(out), {x}, [rows, cols](Node<T>& self) {
    if (auto* dx = grad_of(self, 0))
      for (int r = 0; r < rows; ++r) {
        auto p = self.value.row(r);
        auto g = self.grad.row(r);
        T s = 0;
        for (int c = 0; c < cols; ++c) s += g[c] * p[c];
        for (int c = 0; c < cols; ++c) dx->at(r, c) += p[c] * (g[c] - s);
      }
  });
}

template <typename T>
Var<T> log_softmax_rows(const Var<T>& x) {
  Tensor<T> out = x.value().clone();
  const int rows = out.rows(), cols = out.cols();
  for (int r = 0; r < rows; ++r) {
    auto row = out.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T sum = 0;
    for (auto v : row) sum += std::exp(v - mx);
    const T lse = mx + std::log(sum);
    for (auto& v : row) v -= lse;
  }
  return make_op<T>("log_softmax_rows", std::move(out), {x},
                    [rows, cols](Node<T>& self) {
    if (auto* dx = grad_of(self, 0))
      for (int r = 0; r < rows; ++r) {
        auto y = self.value.row(r);
        auto g = self.grad.row(r);
        T s = 0;
        for (int c = 0; c < cols; ++c) s += g[c];
        for (int c = 0; c < cols; ++c) dx->at(r, c) += g[c] - std::exp(y[c]) * s;
      }
  });
}

template <typename T>
Var<T> dropout(const Var<T>& x, double rate, bool train, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ShapeError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!train || rate == 0.0) return x;
  Tensor<T> mask(x.rows(), x.cols());
  const T keep_scale = T(1) / static_cast<T>(1.0 - rate);
  // Two 32-bit uniforms per engine draw.
  const auto cut = static_cast<std::uint64_t>(rate * 4294967296.0);
  auto flat = mask.flat();
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (i % 2 == 0) bits = rng();
    const std::uint64_t draw = (i % 2 == 0) ? (bits & 0xffffffffu) : (bits >> 32);
    flat[i] = draw >= cut ? keep_scale : T(0);
  }
  Tensor<T> out = x.value().clone();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_op<T>("dropout", std::move(out), {x}, [mask](Node<T>& self) {
    if (auto* dx = grad_of(self, 0))
      for (std::size_t i = 0; i < mask.size(); ++i) (*dx)[i] += self.grad[i] * mask[i];
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps) {
  const int rows = x.rows(), cols = x.cols();
  if (gain.cols() != cols || bias.cols() != cols || gain.rows() != 1 || bias.rows() != 1)
    shape_fail("layer_norm", x.value().shape_str(), gain.value().shape_str());
  Tensor<T> out(rows, cols);
  Tensor<T> xhat(rows, cols);
  Tensor<T> inv_std(rows, 1);
  for (int r = 0; r < rows; ++r) {
    auto in = x.value().row(r);
    T mean = 0;
    for (auto v : in) mean += v;
    mean /= cols;
    T var = 0;
    for (auto v : in) var += (v - mean) * (v - mean);
    var /= cols;
    const T is = T(1) / std::sqrt(var + eps);
    inv_std[r] = is;
    for (int c = 0; c < cols; ++c) {
      const T h = (in[c] - mean) * is;
      xhat.at(r, c) = h;
      out.at(r, c) = h * gain.value()[c] + bias.value()[c];
    }
  }
  return make_op<T>("layer_norm", std::move(out), {x, gain, bias},
                    [rows, cols, xhat, inv_std](Node<T>& self) {
    const auto& g = self.grad;
    const auto& gv = val(self, 1);
    if (auto* dgain = grad_of(self, 1))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) (*dgain)[c] += g.at(r, c) * xhat.at(r, c);
    if (auto* dbias = grad_of(self, 2))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) (*dbias)[c] += g.at(r, c);
    if (auto* dx = grad_of(self, 0))
      for (int r = 0; r < rows; ++r) {
        T m1 = 0, m2 = 0;
        for (int c = 0; c < cols; ++c) {
          const T d = g.at(r, c) * gv[c];
          m1 += d;
          m2 += d * xhat.at(r, c);
        }
        m1 /= cols;
        m2 /= cols;
        for (int c = 0; c < cols; ++c) {
          const T d = g.at(r, c) * gv[c];
          dx->at(r, c) += inv_std[r] * (d - m1 - xhat.at(r, c) * m2);
        }
      }
  });
}

template <typename T>
Var<T> weight_norm(const Var<T>& v, const Var<T>& g) {
  const int rows = v.rows(), cols = v.cols();
  if (g.rows() != 1 || g.cols() != cols)
    shape_fail("weight_norm", v.value().shape_str(), g.value().shape_str());
  Tensor<T> norms(1, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) norms[c] += v.value().at(r, c) * v.value().at(r, c);
  for (auto& n : norms.flat()) {
    if (n <= T(0)) throw NumericError("weight_norm: zero-norm column");
    n = std::sqrt(n);
  }
  Tensor<T> out(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      out.at(r, c) = g.value()[c] * v.value().at(r, c) / norms[c];
  return make_op<T>("weight_norm", std::move(out), {v, g},
                    [rows, cols, norms](Node<T>& self) {
    const auto& dw = self.grad;
    const auto& vv = val(self, 0);
    const auto& gv = val(self, 1);
    // s_c = sum_r dw[r,c] * v[r,c] / n_c
    std::vector<T> s(cols, T(0));
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) s[c] += dw.at(r, c) * vv.at(r, c) / norms[c];
    if (auto* dg = grad_of(self, 1))
      for (int c = 0; c < cols; ++c) (*dg)[c] += s[c];
    if (auto* dv = grad_of(self, 0))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          dv->at(r, c) += gv[c] / norms[c] *
                          (dw.at(r, c) - s[c] * vv.at(r, c) / norms[c]);
  });
}

template <typename T>
Var<T> weight_norm_gain(const Var<T>& v, const Var<T>& g) {
  const int rows = v.rows(), cols = v.cols();
  if (g.rows() != 1 || g.cols() != cols)
    shape_fail("weight_norm_gain", v.value().shape_str(), g.value().shape_str());
  Tensor<T> norms(1, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) norms[c] += v.value().at(r, c) * v.value().at(r, c);
  for (auto& n : norms.flat()) {
    if (n <= T(0)) throw NumericError("weight_norm_gain: zero-norm column");
    n = std::sqrt(n);
  }
  Tensor<T> out(1, cols);
  for (int c = 0; c < cols; ++c) out[c] = g.value()[c] / norms[c];
  return make_op<T>("weight_norm_gain", std::move(out), {v, g},
                    [rows, cols, norms](Node<T>& self) {
    const auto& ds = self.grad;
    const auto& vv = val(self, 0);
    const auto& gv = val(self, 1);
    if (auto* dg = grad_of(self, 1))
      for (int c = 0; c < cols; ++c) (*dg)[c] += ds[c] / norms[c];
    if (auto* dv = grad_of(self, 0))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          dv->at(r, c) -= ds[c] * gv[c] * vv.at(r, c) / (norms[c] * norms[c] * norms[c]);
  });
}

template <typename T>
Var<T> scale_columns(const Var<T>& x, const Var<T>& s) {
  if (s.rows() != 1 || s.cols() != x.cols())
    shape_fail("scale_columns", x.value().shape_str(), s.value().shape_str());
  Tensor<T> out = x.value().clone();
  const int rows = out.rows(), cols = out.cols();
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out.at(r, c) *= s.value()[c];
  return make_op<T>("scale_columns", std::move(out), {x, s}, [rows, cols](Node<T>& self) {
    const auto& xv = val(self, 0);
    const auto& sv = val(self, 1);
    if (auto* dx = grad_of(self, 0))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) dx->at(r, c) += self.grad.at(r, c) * sv[c];
    if (auto* ds = grad_of(self, 1))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) (*ds)[c] += self.grad.at(r, c) * xv.at(r, c);
  });
}

template <typename T>
Var<T> frames(const Var<T>& x, int kernel, int stride, int pad_left, int pad_right) {
  if (kernel < 1 || stride < 1 || pad_left < 0 || pad_right < 0)
    throw ShapeError("frames: kernel/stride must be >= 1 and padding >= 0");
  const int len = x.rows(), ch = x.cols();
  const int padded = len + pad_left + pad_right;
  if (len < 1 || padded < kernel)
    throw ShapeError("frames: sequence of " + std::to_string(padded) +
                     " padded rows is shorter than kernel " + std::to_string(kernel));
  const int positions = (padded - kernel) / stride + 1;
  auto src_row = [=](int padded_row) {
    return std::clamp(padded_row - pad_left, 0, len - 1);
  };
  Tensor<T> out(positions, kernel * ch);
  for (int p = 0; p < positions; ++p)
    for (int j = 0; j < kernel; ++j) {
      auto in = x.value().row(src_row(p * stride + j));
      std::copy(in.begin(), in.end(),
                out.data() + static_cast<std::size_t>(p) * kernel * ch +
                    static_cast<std::size_t>(j) * ch);
    }
  return make_op<T>("frames", std::move(out), {x},
                    [=](Node<T>& self) {
    if (auto* dx = grad_of(self, 0))
      for (int p = 0; p < positions; ++p)
        for (int j = 0; j < kernel; ++j) {
          const T* g = self.grad.data() + static_cast<std::size_t>(p) * kernel * ch +
                       static_cast<std::size_t>(j) * ch;
          T* d = dx->data() + static_cast<std::size_t>(src_row(p * stride + j)) * ch;
          for (int c = 0; c < ch; ++c) d[c] += g[c];
        }
  });
}

template <typename T>
Var<T> conv1d_strided(const Var<T>& x, const Var<T>& w, const Var<T>& b, int kernel,
                      int stride, int pad_left) {
  if (w.rows() != kernel * x.cols())
    shape_fail("conv1d_strided", x.value().shape_str(), w.value().shape_str());
  return linear(frames(x, kernel, stride, pad_left, 0), w, b);
}

template <typename T>
Var<T> mean_rows(const Var<T>& x) {
  const int rows = x.rows(), cols = x.cols();
  Tensor<T> out(1, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) out[c] += x.value().at(r, c);
  for (auto& v : out.flat()) v /= rows;
  return make_op<T>("mean_rows", std::move(out), {x}, [rows, cols](Node<T>& self) {
    if (auto* dx = grad_of(self, 0))
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) dx->at(r, c) += self.grad[c] / rows;
  });
}

template <typename T>
Var<T> sum_all(const Var<T>& x) {
  Tensor<T> out(1, 1);
  out[0] = std::accumulate(x.value().flat().begin(), x.value().flat().end(), T(0));
  return make_op<T>("sum_all", std::move(out), {x}, [](Node<T>& self) {
    if (auto* dx = grad_of(self, 0))
      for (auto& v : dx->flat()) v += self.grad[0];
  });
}

template <typename T>
Var<T> mean_all(const Var<T>& x) {
  return scale(sum_all(x), T(1) / static_cast<T>(x.value().size()));
}

template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& labels,
                     const std::vector<T>& weights) {
  const int rows = logits.rows(), cols = logits.cols();
  if (static_cast<int>(labels.size()) != rows)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) +
                     " labels for logits " + logits.value().shape_str());
  if (!weights.empty() && static_cast<int>(weights.size()) != rows)
    throw ShapeError("cross_entropy: weight count does not match rows");
  std::vector<T> w = weights.empty() ? std::vector<T>(rows, T(1)) : weights;
  const T wsum = std::accumulate(w.begin(), w.end(), T(0));
  if (wsum <= T(0)) throw ShapeError("cross_entropy: weights sum to zero");
  Tensor<T> probs(rows, cols);
  Tensor<T> out(1, 1);
  for (int r = 0; r < rows; ++r) {
    if (labels[r] < 0 || labels[r] >= cols)
      throw ShapeError("cross_entropy: label " + std::to_string(labels[r]) +
                       " out of range for " + std::to_string(cols) + " classes");
    auto in = logits.value().row(r);
    const T mx = *std::max_element(in.begin(), in.end());
    T sum = 0;
    for (int c = 0; c < cols; ++c) sum += std::exp(in[c] - mx);
    const T lse = mx + std::log(sum);
    for (int c = 0; c < cols; ++c) probs.at(r, c) = std::exp(in[c] - lse);
    out[0] += w[r] * (lse - in[labels[r]]);
  }
  out[0] /= wsum;
  return make_op<T>("cross_entropy", std::move(out), {logits},
                    [=](Node<T>& self) {
    if (auto* dx = grad_of(self, 0)) {
      const T g = self.grad[0];
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          dx->at(r, c) += g * w[r] / wsum *
                          (probs.at(r, c) - (c == labels[r] ? T(1) : T(0)));
    }
  });
}

template <typename T>
Var<T> masked_attention_scores(const Var<T>& q, const Var<T>& k, const Var<T>& bias,
                               const AttentionGeometry& geom, T scale_factor) {
  if (q.cols() != k.cols())
    shape_fail("masked_attention_scores", q.value().shape_str(), k.value().shape_str());
  const int tq = q.rows(), tk = k.rows(), dh = q.cols();
  const int s = geom.shift;
  const int span = 2 * s - 1;
  const bool has_bias = static_cast<bool>(bias);
  if (has_bias && (bias.rows() != 1 || bias.cols() != 2 * span + 1))
    shape_fail("masked_attention_scores(bias)", bias.value().shape_str(),
               "[1x" + std::to_string(2 * span + 1) + "]");
  auto allowed = [&geom, s](int t, int u) {
    if (!geom.streaming_mask) return true;
    return u <= t && u >= s * (t / s - 1);
  };
  auto bias_index = [span](int t, int u) {
    return std::clamp(t - u, -span, span) + span;
  };
  Tensor<T> out(tq, tk);
  kernels::gemm_nt(tq, tk, dh, q.value().data(), dh, k.value().data(), dh, out.data(),
                   tk, false);
  for (int i = 0; i < tq; ++i) {
    const int t = geom.query_pos0 + i;
    for (int j = 0; j < tk; ++j) {
      const int u = geom.key_pos0 + j;
      T& o = out.at(i, j);
      if (!allowed(t, u)) {
        o = kMaskedScore<T>;
      } else {
        o *= scale_factor;
        if (has_bias) o += bias.value()[bias_index(t, u)];
      }
    }
  }
  std::vector<Var<T>> inputs{q, k};
  if (has_bias) inputs.push_back(bias);
  return make_op<T>("masked_attention_scores", std::move(out), std::move(inputs),
                    [=](Node<T>& self) {
    // Zero the gradient at masked entries, scale the rest.
    Tensor<T> g(tq, tk);
    for (int i = 0; i < tq; ++i)
      for (int j = 0; j < tk; ++j)
        if (allowed(geom.query_pos0 + i, geom.key_pos0 + j))
          g.at(i, j) = self.grad.at(i, j);
    if (has_bias)
      if (auto* db = grad_of(self, 2))
        for (int i = 0; i < tq; ++i)
          for (int j = 0; j < tk; ++j)
            (*db)[bias_index(geom.query_pos0 + i, geom.key_pos0 + j)] += g.at(i, j);
    for (auto& v : g.flat()) v *= scale_factor;
    if (auto* dq = grad_of(self, 0))
      kernels::gemm_nn(tq, dh, tk, g.data(), tk, val(self, 1).data(), dh, dq->data(),
                       dh, true);
    if (auto* dk = grad_of(self, 1))
      kernels::gemm_tn(tk, dh, tq, g.data(), tk, val(self, 0).data(), dh, dk->data(),
                       dh, true);
  });
}

template <typename T>
Tensor<T> lstm_forward(const Tensor<T>& x, const Tensor<T>& w_ih, const Tensor<T>& w_hh,
                       const Tensor<T>& b, Tensor<T>& h, Tensor<T>& c) {
  const int steps = x.rows(), in = x.cols(), hid = w_hh.rows(), g4 = 4 * hid;
  Tensor<T> gates(steps, g4);
  for (int t = 0; t < steps; ++t)
    std::copy(b.data(), b.data() + g4, gates.data() + static_cast<std::size_t>(t) * g4);
  kernels::gemm_nn(steps, g4, in, x.data(), in, w_ih.data(), g4, gates.data(), g4, true);
  Tensor<T> out(steps, hid);
  for (int t = 0; t < steps; ++t) {
    T* gt = gates.data() + static_cast<std::size_t>(t) * g4;
    kernels::gemm_nn(1, g4, hid, h.data(), hid, w_hh.data(), g4, gt, g4, true);
    for (int j = 0; j < hid; ++j) {
      const T ig = sigmoid_scalar(gt[j]);
      const T fg = sigmoid_scalar(gt[hid + j]);
      const T gg = std::tanh(gt[2 * hid + j]);
      const T og = sigmoid_scalar(gt[3 * hid + j]);
      c[j] = fg * c[j] + ig * gg;
      h[j] = og * std::tanh(c[j]);
    }
    std::copy(h.data(), h.data() + hid, out.data() + static_cast<std::size_t>(t) * hid);
  }
  return out;
}

template <typename T>
Var<T> lstm_sequence(const Var<T>& x, const Var<T>& w_ih, const Var<T>& w_hh,
                     const Var<T>& b) {
  const int steps = x.rows(), in = x.cols(), hid = w_hh.rows(), g4 = 4 * hid;
  if (w_ih.rows() != in || w_ih.cols() != g4)
    shape_fail("lstm_sequence(w_ih)", x.value().shape_str(), w_ih.value().shape_str());
  if (w_hh.cols() != g4)
    shape_fail("lstm_sequence(w_hh)", w_ih.value().shape_str(), w_hh.value().shape_str());
  if (b.rows() != 1 || b.cols() != g4)
    shape_fail("lstm_sequence(b)", w_ih.value().shape_str(), b.value().shape_str());

  // Forward with activations kept for BPTT: act[t] = [i, f, g, o], cell[t].
  Tensor<T> act(steps, g4), cell(steps, hid), out(steps, hid);
  Tensor<T> gates(steps, g4);
  for (int t = 0; t < steps; ++t)
    std::copy(b.value().data(), b.value().data() + g4,
              gates.data() + static_cast<std::size_t>(t) * g4);
  kernels::gemm_nn(steps, g4, in, x.value().data(), in, w_ih.value().data(), g4,
                   gates.data(), g4, true);
  std::vector<T> h(hid, T(0)), c(hid, T(0));
  for (int t = 0; t < steps; ++t) {
    T* gt = gates.data() + static_cast<std::size_t>(t) * g4;
    kernels::gemm_nn(1, g4, hid, h.data(), hid, w_hh.value().data(), g4, gt, g4, true);
    T* at = act.data() + static_cast<std::size_t>(t) * g4;
    for (int j = 0; j < hid; ++j) {
      at[j] = sigmoid_scalar(gt[j]);
      at[hid + j] = sigmoid_scalar(gt[hid + j]);
      at[2 * hid + j] = std::tanh(gt[2 * hid + j]);
      at[3 * hid + j] = sigmoid_scalar(gt[3 * hid + j]);
      c[j] = at[hid + j] * c[j] + at[j] * at[2 * hid + j];
      h[j] = at[3 * hid + j] * std::tanh(c[j]);
      cell.at(t, j) = c[j];
      out.at(t, j) = h[j];
    }
  }
  return make_op<T>("lstm_sequence", std::move(out), {x, w_ih, w_hh, b},
                    [=](Node<T>& self) {
    const auto& dout = self.grad;
    const auto& hs = self.value;
    Tensor<T> dgates(steps, g4);
    std::vector<T> dh_next(hid, T(0)), dc_next(hid, T(0));
    for (int t = steps - 1; t >= 0; --t) {
      const T* at = act.data() + static_cast<std::size_t>(t) * g4;
      T* dg = dgates.data() + static_cast<std::size_t>(t) * g4;
      for (int j = 0; j < hid; ++j) {
        const T ig = at[j], fg = at[hid + j], gg = at[2 * hid + j], og = at[3 * hid + j];
        const T ct = cell.at(t, j);
        const T tc = std::tanh(ct);
        const T cprev = t > 0 ? cell.at(t - 1, j) : T(0);
        const T dh = dout.at(t, j) + dh_next[j];
        const T dc = dh * og * (T(1) - tc * tc) + dc_next[j];
        dg[j] = dc * gg * ig * (T(1) - ig);
        dg[hid + j] = dc * cprev * fg * (T(1) - fg);
        dg[2 * hid + j] = dc * ig * (T(1) - gg * gg);
        dg[3 * hid + j] = dh * tc * og * (T(1) - og);
        dc_next[j] = dc * fg;
      }
      // dh_prev = dg * W_hh^T
      kernels::gemm_nt(1, hid, g4, dg, g4, val(self, 2).data(), g4, dh_next.data(), hid,
                       false);
    }
    if (auto* dwhh = grad_of(self, 2))
      if (steps > 1)  // h_{t-1} for t >= 1 are rows 0..steps-2 of hs
        kernels::gemm_tn(hid, g4, steps - 1, hs.data(), hid,
                         dgates.data() + g4, g4, dwhh->data(), g4, true);
    if (auto* dwih = grad_of(self, 1))
      kernels::gemm_tn(in, g4, steps, val(self, 0).data(), in, dgates.data(), g4,
                       dwih->data(), g4, true);
    if (auto* db = grad_of(self, 3))
      for (int t = 0; t < steps; ++t)
        for (int j = 0; j < g4; ++j) (*db)[j] += dgates.at(t, j);
    if (auto* dx = grad_of(self, 0))
      kernels::gemm_nt(steps, in, g4, dgates.data(), g4, val(self, 1).data(), g4,
                       dx->data(), in, true);
  });
}

#define FTM_INSTANTIATE(T)                                                          \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                             \
  template Var<T> add(const Var<T>&, const Var<T>&);                                \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                \
  template Var<T> scale(const Var<T>&, T);                                          \
  template Var<T> add_bias(const Var<T>&, const Var<T>&);                           \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);              \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                          \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                          \
  template Var<T> slice_rows(const Var<T>&, int, int);                              \
  template Var<T> slice_cols(const Var<T>&, int, int);                              \
  template Var<T> take_rows(const Var<T>&, const std::vector<int>&);                \
  template Var<T> relu(const Var<T>&);                                              \
  template Var<T> sigmoid(const Var<T>&);                                           \
  template Var<T> tanh(const Var<T>&);                                              \
  template Var<T> softmax_rows(const Var<T>&);                                      \
  template Var<T> log_softmax_rows(const Var<T>&);                                  \
  template Var<T> dropout(const Var<T>&, double, bool, std::mt19937_64&);           \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);       \
  template Var<T> weight_norm(const Var<T>&, const Var<T>&);                        \
  template Var<T> weight_norm_gain(const Var<T>&, const Var<T>&);                   \
  template Var<T> scale_columns(const Var<T>&, const Var<T>&);                        \
  template Var<T> frames(const Var<T>&, int, int, int, int);                        \
  template Var<T> conv1d_strided(const Var<T>&, const Var<T>&, const Var<T>&, int,  \
                                 int, int);                                         \
  template Var<T> mean_rows(const Var<T>&);                                         \
  template Var<T> mean_all(const Var<T>&);                                          \
  template Var<T> sum_all(const Var<T>&);                                           \
  template Var<T> cross_entropy(const Var<T>&, const std::vector<int>&,             \
                                const std::vector<T>&);                             \
  template Var<T> masked_attention_scores(const Var<T>&, const Var<T>&,             \
                                          const Var<T>&, const AttentionGeometry&,  \
                                          T);                                       \
  template Var<T> lstm_sequence(const Var<T>&, const Var<T>&, const Var<T>&,        \
                                const Var<T>&);                                     \
  template Tensor<T> lstm_forward(const Tensor<T>&, const Tensor<T>&,               \
                                  const Tensor<T>&, const Tensor<T>&, Tensor<T>&,   \
                                  Tensor<T>&);

FTM_INSTANTIATE(float)
FTM_INSTANTIATE(double)
#undef FTM_INSTANTIATE

}  // namespace ftm
