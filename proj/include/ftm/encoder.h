// Streaming self-attention encoder.
//
// Pre-norm transformer blocks over an input projection, with a learned
// relative-position bias per head clipped to the 2S attention window. Frame t
// attends to frame u iff u <= t and u >= S * (floor(t/S) - 1): the causal part
// of its own shift window plus the whole previous one.
//
// Three evaluation paths share the weights:
//   encode_a2a        full T x T attention, masked or unmasked
//   encode_blockwise  masked attention computed one shift window at a time
//   encode_stream     chunk-by-chunk inference with a per-layer K/V cache
// With the mask they produce the same embeddings.

#ifndef FTM_ENCODER_H_
#define FTM_ENCODER_H_

#include <random>
#include <vector>

#include "ftm/model_config.h"
#include "ftm/ops.h"
#include "ftm/params.h"

namespace ftm {

// Row-major T x T allowed-attention matrix for the streaming mask.
std::vector<std::vector<bool>> attention_mask(int t, int s);

template <typename T>
class Encoder {
 public:
  // Registers enc.* parameters in params, initialised from rng.
  Encoder(const ModelConfig& cfg, ParamSet<T>& params, std::mt19937_64& rng);

  const ModelConfig& config() const { return cfg_; }

  // rng may be null when train is false.
  Var<T> encode_a2a(const Var<T>& x, bool streaming_mask, bool train,
                    std::mt19937_64* rng) const;
  Var<T> encode_blockwise(const Var<T>& x, bool train, std::mt19937_64* rng) const;

  struct StreamState {
    std::vector<Tensor<T>> keys;    // per layer, previous chunk, S x d_model
    std::vector<Tensor<T>> values;  // per layer, previous chunk, S x d_model
    int frames_consumed = 0;
    std::size_t bytes() const;
  };

  StreamState start_stream() const;

  // Consumes 1..S new frames and returns their embeddings. A short chunk is
  // padded to S rows by repeating its last frame and must be the final one.
  Tensor<T> encode_stream(StreamState& state, const Tensor<T>& chunk) const;

 private:
  struct Layer {
    Var<T> attn_ln_g, attn_ln_b, wq, wk, wv, wo, bo, rel_bias;
    Var<T> ff_ln_g, ff_ln_b, w1, b1, w2, b2;
  };

  // One shift window of queries against its key window, all heads.
  Var<T> attend(const Layer& layer, const Var<T>& q, const Var<T>& k, const Var<T>& v,
                const AttentionGeometry& geom) const;
  Var<T> feed_forward(const Layer& layer, const Var<T>& h, bool train,
                      std::mt19937_64* rng) const;
  Var<T> attention_residual(const Layer& layer, const Var<T>& h, const Var<T>& att,
                            bool train, std::mt19937_64* rng) const;

  ModelConfig cfg_;
  Var<T> in_w_, in_b_, out_g_, out_b_;
  std::vector<Layer> layers_;
};

}  // namespace ftm

#endif  // FTM_ENCODER_H_
