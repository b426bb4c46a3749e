#include "ftm/encoder.h"

#include <cmath>
#include <string>

#include "ftm/errors.h"
#include "ftm/ops.h"

namespace ftm {

std::vector<std::vector<bool>> attention_mask(int t, int s) {
  if (t < 1 || s < 1) throw ShapeError("attention_mask: T and S must be positive");
  std::vector<std::vector<bool>> m(t, std::vector<bool>(t, false));
  for (int i = 0; i < t; ++i)
    for (int u = 0; u < t; ++u) m[i][u] = u <= i && u >= s * (i / s - 1);
  return m;
}

template <typename T>
Encoder<T>::Encoder(const ModelConfig& cfg, ParamSet<T>& params, std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg.d_model, ff = cfg.d_ff, rel = 4 * cfg.block_shift - 1;
  in_w_ = params.add("enc.in.w", glorot<T>(cfg.input_dim, d, rng));
  in_b_ = params.add("enc.in.b", Tensor<T>(1, d));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string a = "enc." + std::to_string(l) + ".attn.";
    const std::string f = "enc." + std::to_string(l) + ".ff.";
    Layer L;
    L.attn_ln_g = params.add(a + "ln_g", Tensor<T>(1, d, T(1)));
    L.attn_ln_b = params.add(a + "ln_b", Tensor<T>(1, d));
    L.wq = params.add(a + "wq", glorot<T>(d, d, rng));
    L.wk = params.add(a + "wk", glorot<T>(d, d, rng));
    L.wv = params.add(a + "wv", glorot<T>(d, d, rng));
    L.wo = params.add(a + "wo", glorot<T>(d, d, rng));
    L.bo = params.add(a + "bo", Tensor<T>(1, d));
    L.rel_bias = params.add(a + "rel_bias", Tensor<T>(cfg.n_heads, rel));
    L.ff_ln_g = params.add(f + "ln_g", Tensor<T>(1, d, T(1)));
    L.ff_ln_b = params.add(f + "ln_b", Tensor<T>(1, d));
    L.w1 = params.add(f + "w1", glorot<T>(d, ff, rng));
    L.b1 = params.add(f + "b1", Tensor<T>(1, ff));
    L.w2 = params.add(f + "w2", glorot<T>(ff, d, rng));
    L.b2 = params.add(f + "b2", Tensor<T>(1, d));
    layers_.push_back(std::move(L));
  }
  out_g_ = params.add("enc.out.ln_g", Tensor<T>(1, d, T(1)));
  out_b_ = params.add("enc.out.ln_b", Tensor<T>(1, d));
}

template <typename T>
Var<T> Encoder<T>::attend(const Layer& layer, const Var<T>& q, const Var<T>& k,
                          const Var<T>& v, const AttentionGeometry& geom) const {
  const int heads = cfg_.n_heads, dh = cfg_.d_model / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<Var<T>> outs;
  outs.reserve(heads);
  for (int j = 0; j < heads; ++j) {
    Var<T> qh = slice_cols(q, j * dh, (j + 1) * dh);
    Var<T> kh = slice_cols(k, j * dh, (j + 1) * dh);
    Var<T> vh = slice_cols(v, j * dh, (j + 1) * dh);
    Var<T> scores =
        masked_attention_scores(qh, kh, slice_rows(layer.rel_bias, j, j + 1), geom, scale);
    outs.push_back(matmul(softmax_rows(scores), vh));
  }
  return heads == 1 ? outs[0] : concat_cols(outs);
}

template <typename T>
Var<T> Encoder<T>::attention_residual(const Layer& layer, const Var<T>& h,
                                      const Var<T>& att, bool train,
                                      std::mt19937_64* rng) const {
  Var<T> proj = linear(att, layer.wo, layer.bo);
  if (train) proj = dropout(proj, cfg_.dropout, true, *rng);
  return add(h, proj);
}

template <typename T>
Var<T> Encoder<T>::feed_forward(const Layer& layer, const Var<T>& h, bool train,
                                std::mt19937_64* rng) const {
  Var<T> hidden = relu(linear(layer_norm(h, layer.ff_ln_g, layer.ff_ln_b), layer.w1, layer.b1));
  if (train) hidden = dropout(hidden, cfg_.dropout, true, *rng);
  Var<T> out = linear(hidden, layer.w2, layer.b2);
  if (train) out = dropout(out, cfg_.dropout, true, *rng);
  return add(h, out);
}

template <typename T>
Var<T> Encoder<T>::encode_a2a(const Var<T>& x, bool streaming_mask, bool train,
                              std::mt19937_64* rng) const {
  if (x.rows() < 1) throw ShapeError("encode_a2a: empty input");
  if (x.cols() != cfg_.input_dim)
    throw ShapeError("encode_a2a: input has " + std::to_string(x.cols()) +
                     " columns, encoder expects " + std::to_string(cfg_.input_dim));
  AttentionGeometry geom{0, 0, cfg_.block_shift, streaming_mask};
  Var<T> h = linear(x, in_w_, in_b_);
  for (const Layer& layer : layers_) {
    Var<T> att;
    {
      Var<T> a = layer_norm(h, layer.attn_ln_g, layer.attn_ln_b);
      att = attend(layer, matmul(a, layer.wq), matmul(a, layer.wk), matmul(a, layer.wv), geom);
    }
    h = attention_residual(layer, h, att, train, rng);
    att = Var<T>();
    h = feed_forward(layer, h, train, rng);
  }
  return layer_norm(h, out_g_, out_b_);
}

template <typename T>
Var<T> Encoder<T>::encode_blockwise(const Var<T>& x, bool train, std::mt19937_64* rng) const {
  if (x.rows() < 1) throw ShapeError("encode_blockwise: empty input");
  if (x.cols() != cfg_.input_dim)
    throw ShapeError("encode_blockwise: input has " + std::to_string(x.cols()) +
                     " columns, encoder expects " + std::to_string(cfg_.input_dim));
  const int n = x.rows(), s = cfg_.block_shift;
  Var<T> h = linear(x, in_w_, in_b_);
  for (const Layer& layer : layers_) {
    Var<T> att;
    {
      Var<T> a = layer_norm(h, layer.attn_ln_g, layer.attn_ln_b);
      Var<T> q = matmul(a, layer.wq), k = matmul(a, layer.wk), v = matmul(a, layer.wv);
      std::vector<Var<T>> windows;
      for (int begin = 0; begin < n; begin += s) {
        const int end = std::min(n, begin + s), key_begin = std::max(0, begin - s);
        AttentionGeometry geom{begin, key_begin, s, true};
        windows.push_back(attend(layer, slice_rows(q, begin, end),
                                 slice_rows(k, key_begin, end),
                                 slice_rows(v, key_begin, end), geom));
      }
      att = windows.size() == 1 ? windows[0] : concat_rows(windows);
    }
    h = attention_residual(layer, h, att, train, rng);
    att = Var<T>();
    h = feed_forward(layer, h, train, rng);
  }
  return layer_norm(h, out_g_, out_b_);
}

template <typename T>
std::size_t Encoder<T>::StreamState::bytes() const {
  std::size_t b = 0;
  for (const auto& t : keys) b += t.bytes();
  for (const auto& t : values) b += t.bytes();
  return b;
}

template <typename T>
typename Encoder<T>::StreamState Encoder<T>::start_stream() const {
  StreamState st;
  st.keys.resize(layers_.size());
  st.values.resize(layers_.size());
  return st;
}

template <typename T>
Tensor<T> Encoder<T>::encode_stream(StreamState& state, const Tensor<T>& chunk) const {
  const int s = cfg_.block_shift, n = chunk.rows();
  if (n < 1) throw ShapeError("encode_stream: empty chunk");
  if (n > s)
    throw ShapeError("encode_stream: chunk of " + std::to_string(n) +
                     " frames exceeds shift " + std::to_string(s));
  if (chunk.cols() != cfg_.input_dim)
    throw ShapeError("encode_stream: chunk has " + std::to_string(chunk.cols()) +
                     " columns, encoder expects " + std::to_string(cfg_.input_dim));
  if (state.frames_consumed % s != 0)
    throw ShapeError("encode_stream: stream already ended with a short chunk");
  NoGradGuard no_grad;
  Tensor<T> padded = chunk;
  if (n < s) {
    padded = Tensor<T>(s, chunk.cols());
    for (int r = 0; r < s; ++r) {
      auto src = chunk.row(std::min(r, n - 1));
      std::copy(src.begin(), src.end(), padded.row(r).begin());
    }
  }
  Var<T> h = linear(constant(padded), in_w_, in_b_);
  padded = Tensor<T>();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Var<T> att;
    {
      Var<T> a = layer_norm(h, layer.attn_ln_g, layer.attn_ln_b);
      Var<T> q = matmul(a, layer.wq), k = matmul(a, layer.wk), v = matmul(a, layer.wv);
      a = Var<T>();
      const bool warm = !state.keys[l].empty();
      AttentionGeometry geom{warm ? s : 0, 0, s, true};
      if (warm) {
        att = attend(layer, q, concat_rows<T>({constant(state.keys[l]), k}),
                     concat_rows<T>({constant(state.values[l]), v}), geom);
      } else {
        att = attend(layer, q, k, v, geom);
      }
      state.keys[l] = k.value();
      state.values[l] = v.value();
    }
    h = attention_residual(layer, h, att, false, nullptr);
    att = Var<T>();
    h = feed_forward(layer, h, false, nullptr);
  }
  Tensor<T> z = layer_norm(h, out_g_, out_b_).value();
  state.frames_consumed += n;
  if (n == s) return z;
  Tensor<T> out(n, z.cols());
  std::copy(z.data(), z.data() + out.size(), out.data());
  return out;
}

template class Encoder<float>;
template class Encoder<double>;

}  // namespace ftm
