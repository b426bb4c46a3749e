// Encoder + phonetic head + one summary head, with the inference paths.

#ifndef FTM_MODEL_H_
#define FTM_MODEL_H_

#include <memory>
#include <random>
#include <string>

#include "ftm/encoder.h"
#include "ftm/summary.h"

namespace ftm {

template <typename T>
struct ModelOutput {
  Var<T> embeddings;
  Var<T> phone_logits;  // T x (phone_alphabet + 1), column 0 is blank
  HeadOutput<T> head;
};

template <typename T>
class FtmModel {
 public:
  FtmModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ParamSet<T>& params() { return params_; }
  const ParamSet<T>& params() const { return params_; }
  const Encoder<T>& encoder() const { return *encoder_; }
  const SummaryHead<T>& head() const { return *head_; }

  // Streaming kinds use the masked encoder (computed window by window), the
  // A2A kind attends over the whole utterance.
  Var<T> encode(const Var<T>& x, bool train, std::mt19937_64* rng) const;
  Var<T> phone_logits(const Var<T>& z) const;
  ModelOutput<T> forward(const Var<T>& x, bool train, std::mt19937_64* rng,
                         bool with_head = true) const;

  // Whole-utterance inference without gradients.
  ScoreTrajectory score(const Tensor<T>& x) const;
  // Chunk-by-chunk inference; equals score() for streaming kinds. The A2A kind
  // has no streaming path and falls back to score().
  ScoreTrajectory score_streaming(const Tensor<T>& x) const;

 private:
  ModelConfig cfg_;
  ParamSet<T> params_;
  std::unique_ptr<Encoder<T>> encoder_;
  Var<T> phone_w_, phone_b_;
  std::unique_ptr<SummaryHead<T>> head_;
};

}  // namespace ftm

#endif  // FTM_MODEL_H_
