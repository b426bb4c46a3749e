#include "ftm/model.h"

#include "ftm/errors.h"
#include "ftm/ops.h"

namespace ftm {

template <typename T>
FtmModel<T>::FtmModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  encoder_ = std::make_unique<Encoder<T>>(cfg_, params_, rng);
  phone_w_ = params_.add("phone.w", glorot<T>(cfg_.d_model, cfg_.phone_alphabet + 1, rng));
  phone_b_ = params_.add("phone.b", Tensor<T>(1, cfg_.phone_alphabet + 1));
  head_ = make_summary_head<T>(cfg_, params_, rng);
}

template <typename T>
Var<T> FtmModel<T>::encode(const Var<T>& x, bool train, std::mt19937_64* rng) const {
  if (is_streaming(cfg_.summary_kind)) return encoder_->encode_blockwise(x, train, rng);
  return encoder_->encode_a2a(x, false, train, rng);
}

template <typename T>
Var<T> FtmModel<T>::phone_logits(const Var<T>& z) const {
  return linear(z, phone_w_, phone_b_);
}

template <typename T>
ModelOutput<T> FtmModel<T>::forward(const Var<T>& x, bool train, std::mt19937_64* rng,
                                    bool with_head) const {
  ModelOutput<T> out;
  out.embeddings = encode(x, train, rng);
  out.phone_logits = phone_logits(out.embeddings);
  if (with_head) out.head = head_->forward(out.embeddings, train, rng);
  return out;
}

template <typename T>
ScoreTrajectory FtmModel<T>::score(const Tensor<T>& x) const {
  NoGradGuard ng;
  Var<T> z = encode(constant(x), false, nullptr);
  return head_->forward(z, false, nullptr).trajectory;
}

template <typename T>
ScoreTrajectory FtmModel<T>::score_streaming(const Tensor<T>& x) const {
  if (!is_streaming(cfg_.summary_kind)) return score(x);
  if (x.rows() < 1) throw ShapeError("score_streaming: empty input");
  const int s = cfg_.block_shift, cols = x.cols();
  auto enc_state = encoder_->start_stream();
  auto head_state = head_->start();
  ScoreTrajectory traj;
  for (int begin = 0; begin < x.rows(); begin += s) {
    const int end = std::min(x.rows(), begin + s);
    Tensor<T> chunk(end - begin, cols);
    std::copy(x.data() + static_cast<std::size_t>(begin) * cols,
              x.data() + static_cast<std::size_t>(end) * cols, chunk.data());
    Tensor<T> z = encoder_->encode_stream(enc_state, chunk);
    chunk = Tensor<T>();
    head_->push(*head_state, z, traj);
  }
  head_->finish(*head_state, traj);
  return traj;
}

template class FtmModel<float>;
template class FtmModel<double>;

}  // namespace ftm
