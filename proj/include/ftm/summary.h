// Sequence summary layers: turn encoder embeddings Z into block-wise scores
// and a final mitigation score.
//
// Scores are P(device-directed). All streaming kinds emit at the same times:
// every S frames once 2S frames have been seen, plus a flush emission at the
// true length T when T is not a multiple of S (or T < 2S).

#ifndef FTM_SUMMARY_H_
#define FTM_SUMMARY_H_

#include <array>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "ftm/model_config.h"
#include "ftm/params.h"

namespace ftm {

struct ScoreTrajectory {
  std::vector<int> times;  // frames consumed when the score was emitted
  std::vector<double> scores;
  double final_score = 0;
};

std::vector<int> emission_times(int t, int s);

// Earliest emission with score < threshold, if any.
std::optional<int> early_decision(const ScoreTrajectory& traj, double threshold);

struct TrajectoryRow {
  std::string utterance_id;
  const ScoreTrajectory* trajectory;
};

// Columns: utterance_id, frame_time, seconds, score, final_score.
void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows,
                          double frame_period_ms);

template <typename T>
struct HeadOutput {
  Var<T> logits;  // rows scored by cross-entropy: one per emission or per frame
  ScoreTrajectory trajectory;
  std::vector<double> frame_posteriors;  // per-frame kinds only
};

template <typename T>
class SummaryHead {
 public:
  class State {
   public:
    virtual ~State() = default;
    virtual std::size_t bytes() const = 0;
    int frames = 0;
  };

  virtual ~SummaryHead() = default;
  virtual SummaryKind kind() const = 0;

  // Whole-utterance forward, differentiable.
  virtual HeadOutput<T> forward(const Var<T>& z, bool train, std::mt19937_64* rng) const = 0;

  virtual std::unique_ptr<State> start() const = 0;
  // Consumes 1..S finalized embedding rows. A chunk shorter than S ends the
  // stream.
  virtual void push(State& state, const Tensor<T>& z, ScoreTrajectory& traj) const = 0;
  // Emits the flush score if one is due and sets final_score.
  virtual void finish(State& state, ScoreTrajectory& traj) const = 0;
};

// Strided TCN head. conv(k1, s1) -> SoL -> conv(k2, s2) -> SoL, plus a linear
// projection of the last frame of each receptive field, then ReLU. SoL is
// weight-norm on the kernel, ReLU, dropout. One embedding per S frames, each
// seeing exactly the preceding 2S frames.
template <typename T>
class StcnHead : public SummaryHead<T> {
 public:
  using State = typename SummaryHead<T>::State;
  StcnHead(const ModelConfig& cfg, ParamSet<T>& params, std::mt19937_64& rng);
  SummaryKind kind() const override { return SummaryKind::kStcn; }
  HeadOutput<T> forward(const Var<T>& z, bool train, std::mt19937_64* rng) const override;
  std::unique_ptr<State> start() const override;
  void push(State& state, const Tensor<T>& z, ScoreTrajectory& traj) const override;
  void finish(State& state, ScoreTrajectory& traj) const override;

  // Unit embeddings for a padded sequence whose length is a multiple of S and
  // at least 2S; row p covers frames [p*S, p*S + 2S).
  Var<T> unit(const Var<T>& z_padded, bool train, std::mt19937_64* rng) const;

 private:
  struct StreamState;
  Var<T> first_conv(const Var<T>& z, bool train, std::mt19937_64* rng) const;
  // c2 holds conv2 outputs before weight-norm scaling and bias, one row per
  // emission, aligned with z_last.
  Var<T> second_stage(const Var<T>& c2, const Var<T>& z_last, bool train,
                      std::mt19937_64* rng) const;
  Tensor<T> block_conv1(const Tensor<T>& z_block) const;
  double block_score(const StreamState& st, const Tensor<T>& c1, const Tensor<T>& z_last) const;
  void advance(StreamState& st, const Tensor<T>& c1) const;

  ModelConfig cfg_;
  Var<T> v1_, g1_, b1_, v2_, g2_, b2_, skip_w_, skip_b_, cls_w_, cls_b_;
  std::vector<std::array<Var<T>, 3>> extra_units_;  // v, g, b
};

// Unidirectional LSTM with a per-frame classifier. A score is the mean
// posterior over the last lstm_tail frames. With streaming off (the A2A
// reference) only the final score is produced.
template <typename T>
class LstmHead : public SummaryHead<T> {
 public:
  using State = typename SummaryHead<T>::State;
  LstmHead(const ModelConfig& cfg, ParamSet<T>& params, std::mt19937_64& rng, bool streaming);
  SummaryKind kind() const override {
    return streaming_ ? SummaryKind::kSlstm : SummaryKind::kA2aLstm;
  }
  HeadOutput<T> forward(const Var<T>& z, bool train, std::mt19937_64* rng) const override;
  std::unique_ptr<State> start() const override;
  void push(State& state, const Tensor<T>& z, ScoreTrajectory& traj) const override;
  void finish(State& state, ScoreTrajectory& traj) const override;

 private:
  struct StreamState;
  ModelConfig cfg_;
  bool streaming_;
  Var<T> w_ih_, w_hh_, b_, cls_w_, cls_b_;
};

// Per-frame linear + ReLU, then linear + softmax. A score is the running mean
// of all frame posteriors so far.
template <typename T>
class AverageHead : public SummaryHead<T> {
 public:
  using State = typename SummaryHead<T>::State;
  AverageHead(const ModelConfig& cfg, ParamSet<T>& params, std::mt19937_64& rng);
  SummaryKind kind() const override { return SummaryKind::kSave; }
  HeadOutput<T> forward(const Var<T>& z, bool train, std::mt19937_64* rng) const override;
  std::unique_ptr<State> start() const override;
  void push(State& state, const Tensor<T>& z, ScoreTrajectory& traj) const override;
  void finish(State& state, ScoreTrajectory& traj) const override;

 private:
  struct StreamState;
  ModelConfig cfg_;
  Var<T> fc_w_, fc_b_, cls_w_, cls_b_;
};

template <typename T>
std::unique_ptr<SummaryHead<T>> make_summary_head(const ModelConfig& cfg, ParamSet<T>& params,
                                                  std::mt19937_64& rng);

}  // namespace ftm

#endif  // FTM_SUMMARY_H_
