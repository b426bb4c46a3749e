// Differentiable primitives. All operands are rank-2 (vectors are 1 x n).
// Shape mismatches throw ShapeError naming the op and both shapes.

#ifndef FTM_OPS_H_
#define FTM_OPS_H_

#include <random>
#include <vector>

#include "ftm/autodiff.h"

namespace ftm {

// Score written into masked attention positions. exp() of it underflows to 0
// exactly in both precisions while staying finite for debug checks.
template <typename T>
constexpr T kMaskedScore = T(-1e30);

template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> scale(const Var<T>& a, T factor);
// x[r x c] + b[1 x c] broadcast over rows.
template <typename T> Var<T> add_bias(const Var<T>& x, const Var<T>& b);
// x * w + b; b may be a null Var.
template <typename T> Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);

template <typename T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <typename T> Var<T> slice_rows(const Var<T>& x, int begin, int end);
template <typename T> Var<T> slice_cols(const Var<T>& x, int begin, int end);
// Gathers rows by index (repeats allowed).
template <typename T> Var<T> take_rows(const Var<T>& x, const std::vector<int>& index);

template <typename T> Var<T> relu(const Var<T>& x);
template <typename T> Var<T> sigmoid(const Var<T>& x);
template <typename T> Var<T> tanh(const Var<T>& x);
template <typename T> Var<T> softmax_rows(const Var<T>& x);
template <typename T> Var<T> log_softmax_rows(const Var<T>& x);

// Inverted dropout: kept entries are scaled by 1/(1-rate) at train time, so
// the op is the identity when train is false.
template <typename T>
Var<T> dropout(const Var<T>& x, double rate, bool train, std::mt19937_64& rng);

// Per-row normalisation with affine gain/bias of shape 1 x c.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias,
                  T eps = T(1e-5));

// w[:, c] = g[c] * v[:, c] / ||v[:, c]||, i.e. one norm per output column.
template <typename T> Var<T> weight_norm(const Var<T>& v, const Var<T>& g);
// g[c] / ||v[:, c]|| as a 1 x c row. x * weight_norm(v, g) equals
// scale_columns(x * v, weight_norm_gain(v, g)) without forming the scaled
// kernel.
template <typename T> Var<T> weight_norm_gain(const Var<T>& v, const Var<T>& g);
// x[r, c] * s[c] for a 1 x c row s.
template <typename T> Var<T> scale_columns(const Var<T>& x, const Var<T>& s);

// Strided frame gathering (im2col). The sequence is padded by repeating the
// first row pad_left times and the last row pad_right times; output row p is
// the concatenation of padded rows [p*stride, p*stride + kernel).
template <typename T>
Var<T> frames(const Var<T>& x, int kernel, int stride, int pad_left, int pad_right);

// 1-D convolution over rows. w is (kernel * c_in) x c_out with row index
// j * c_in + channel, b is 1 x c_out (may be null). Causal: output p only
// sees padded positions <= p*stride + kernel - 1.
template <typename T>
Var<T> conv1d_strided(const Var<T>& x, const Var<T>& w, const Var<T>& b,
                      int kernel, int stride, int pad_left);

template <typename T> Var<T> mean_rows(const Var<T>& x);  // -> 1 x c
template <typename T> Var<T> mean_all(const Var<T>& x);   // -> 1 x 1
template <typename T> Var<T> sum_all(const Var<T>& x);    // -> 1 x 1

// Weighted mean over rows of -log softmax(logits)[label]. Empty weights mean
// uniform.
template <typename T>
Var<T> cross_entropy(const Var<T>& logits, const std::vector<int>& labels,
                     const std::vector<T>& weights = {});

struct AttentionGeometry {
  int query_pos0 = 0;  // absolute frame index of query row 0
  int key_pos0 = 0;    // absolute frame index of key row 0
  int shift = 1;       // S
  bool streaming_mask = true;
};

// scale * q k^T + relative-position bias, with masked entries set to
// kMaskedScore. bias is 1 x (4S-1) indexed by clamp(t-u, -(2S-1), 2S-1) +
// 2S-1, or null for no bias. With streaming_mask, (t, u) is allowed iff
// u <= t and u >= S*(floor(t/S) - 1).
template <typename T>
Var<T> masked_attention_scores(const Var<T>& q, const Var<T>& k, const Var<T>& bias,
                               const AttentionGeometry& geom, T scale_factor);

// Unidirectional LSTM from zero state. Gate column order i, f, g, o in
// w_ih (in x 4H), w_hh (H x 4H), b (1 x 4H). Returns T x H hidden states.
template <typename T>
Var<T> lstm_sequence(const Var<T>& x, const Var<T>& w_ih, const Var<T>& w_hh,
                     const Var<T>& b);

// Forward-only LSTM recurrence shared by the op above and the streaming
// summary layer. h and c hold the carried state (1 x H) and are updated.
template <typename T>
Tensor<T> lstm_forward(const Tensor<T>& x, const Tensor<T>& w_ih,
                       const Tensor<T>& w_hh, const Tensor<T>& b, Tensor<T>& h,
                       Tensor<T>& c);

}  // namespace ftm

#endif  // FTM_OPS_H_
