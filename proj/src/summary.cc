#include "ftm/summary.h"

#include <cmath>
#include <deque>
#include <iomanip>

#include "ftm/errors.h"
#include "ftm/kernels.h"
#include "ftm/ops.h"

namespace ftm {

std::vector<int> emission_times(int t, int s) {
  if (t < 1 || s < 1) throw ShapeError("emission_times: T and S must be positive");
  std::vector<int> times;
  for (int m = 2; m * s <= t; ++m) times.push_back(m * s);
  if (t % s != 0 || t < 2 * s) times.push_back(t);
  return times;
}

std::optional<int> early_decision(const ScoreTrajectory& traj, double threshold) {
  if (traj.scores.empty()) throw ShapeError("early_decision: empty trajectory");
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ShapeError("early_decision: threshold must be in [0, 1]");
  for (std::size_t i = 0; i < traj.scores.size(); ++i)
    if (traj.scores[i] < threshold) return traj.times[i];
  return std::nullopt;
}

void write_trajectory_csv(std::ostream& out, const std::vector<TrajectoryRow>& rows,
                          double frame_period_ms) {
  out << "utterance_id,frame_time,seconds,score,final_score\n";
  out << std::setprecision(9);
  for (const auto& row : rows) {
    const auto& tr = *row.trajectory;
    for (std::size_t i = 0; i < tr.times.size(); ++i)
      out << row.utterance_id << ',' << tr.times[i] << ','
          << tr.times[i] * frame_period_ms / 1000.0 << ',' << tr.scores[i] << ','
          << tr.final_score << '\n';
  }
}

namespace {

template <typename T>
std::vector<double> directed_posteriors(const Tensor<T>& logits) {
  std::vector<double> p(logits.rows());
  for (int r = 0; r < logits.rows(); ++r) {
    const double a = logits.at(r, 0), b = logits.at(r, 1);
    p[r] = 1.0 / (1.0 + std::exp(a - b));
  }
  return p;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

template <typename T>
Tensor<T> pad_rows(const Tensor<T>& z, int rows) {
  if (z.rows() == rows) return z;
  Tensor<T> out(rows, z.cols());
  for (int r = 0; r < rows; ++r) {
    auto src = z.row(std::min(r, z.rows() - 1));
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

template <typename T>
Tensor<T> last_row(const Tensor<T>& z) {
  Tensor<T> out(1, z.cols());
  auto src = z.row(z.rows() - 1);
  std::copy(src.begin(), src.end(), out.data());
  return out;
}

template <typename T>
Tensor<T> column_norms(const Tensor<T>& v) {
  Tensor<T> g(1, v.cols());
  for (int c = 0; c < v.cols(); ++c) {
    double s = 0;
    for (int r = 0; r < v.rows(); ++r) s += static_cast<double>(v.at(r, c)) * v.at(r, c);
    g[c] = static_cast<T>(std::sqrt(s));
  }
  return g;
}

template <typename T>
Var<T> maybe_dropout(const Var<T>& x, double rate, bool train, std::mt19937_64* rng) {
  return train ? dropout(x, rate, true, *rng) : x;
}

void check_open(int frames, int s) {
  if (frames % s != 0) throw ShapeError("summary stream already ended with a short chunk");
}

}  // namespace

// ---------------------------------------------------------------------------
// s-TCN

template <typename T>
struct StcnHead<T>::StreamState : SummaryHead<T>::State {
  // Conv2 taps over the previous block, already summed (1 x C).
  Tensor<T> partial;
  double flush_score = 0;
  std::size_t bytes() const override { return partial.bytes() + sizeof(double); }
};

template <typename T>
StcnHead<T>::StcnHead(const ModelConfig& cfg, ParamSet<T>& params, std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg.d_model, c = cfg.tcn_channels;
  auto conv = [&](const std::string& name, int fan_in, Var<T>& v, Var<T>& g, Var<T>& b) {
    Tensor<T> init = glorot<T>(fan_in, c, rng);
    g = params.add(name + ".g", column_norms(init));
    v = params.add(name + ".v", std::move(init));
    b = params.add(name + ".b", Tensor<T>(1, c));
  };
  conv("ssl.stcn.conv1", cfg.k1 * d, v1_, g1_, b1_);
  conv("ssl.stcn.conv2", cfg.k2 * c, v2_, g2_, b2_);
  skip_w_ = params.add("ssl.stcn.skip.w", glorot<T>(d, c, rng));
  skip_b_ = params.add("ssl.stcn.skip.b", Tensor<T>(1, c));
  for (int u = 1; u < cfg.tcn_units; ++u) {
    std::array<Var<T>, 3> unit;
    conv("ssl.stcn.unit" + std::to_string(u), c, unit[0], unit[1], unit[2]);
    extra_units_.push_back(unit);
  }
  cls_w_ = params.add("ssl.stcn.cls.w", glorot<T>(c, 2, rng));
  cls_b_ = params.add("ssl.stcn.cls.b", Tensor<T>(1, 2));
}

namespace {

// x * weight_norm(v, g) + b with the kernel applied unscaled and the per-column
// gain applied to the output.
template <typename T>
Var<T> normed_output(const Var<T>& xv, const Var<T>& v, const Var<T>& g, const Var<T>& b) {
  return add_bias(scale_columns(xv, weight_norm_gain(v, g)), b);
}

}  // namespace

template <typename T>
Var<T> StcnHead<T>::first_conv(const Var<T>& z, bool train, std::mt19937_64* rng) const {
  Var<T> c1 = normed_output(conv1d_strided(z, v1_, Var<T>(), cfg_.k1, cfg_.s1, 0), v1_, g1_, b1_);
  return maybe_dropout(relu(c1), cfg_.dropout, train, rng);
}

template <typename T>
Var<T> StcnHead<T>::second_stage(const Var<T>& c2, const Var<T>& z_last, bool train,
                                 std::mt19937_64* rng) const {
  Var<T> h = maybe_dropout(relu(normed_output(c2, v2_, g2_, b2_)), cfg_.dropout, train, rng);
  Var<T> e = relu(add(h, linear(z_last, skip_w_, skip_b_)));
  for (const auto& u : extra_units_) {
    Var<T> r = relu(normed_output(linear(e, u[0], Var<T>()), u[0], u[1], u[2]));
    e = relu(add(e, maybe_dropout(r, cfg_.dropout, train, rng)));
  }
  return e;
}

template <typename T>
Var<T> StcnHead<T>::unit(const Var<T>& z_padded, bool train, std::mt19937_64* rng) const {
  const int s = cfg_.block_shift, len = z_padded.rows();
  if (len % s != 0 || len < 2 * s)
    throw ShapeError("stcn unit: padded length " + std::to_string(len) +
                     " must be a multiple of S and at least 2S");
  const int emissions = len / s - 1;
  std::vector<int> last(emissions);
  for (int p = 0; p < emissions; ++p) last[p] = p * s + 2 * s - 1;
  Var<T> c1 = first_conv(z_padded, train, rng);
  // Conv2 rows whose receptive field ends on a shift boundary.
  Var<T> c2 = conv1d_strided(c1, v2_, Var<T>(), cfg_.k2, cfg_.s2, 0);
  if (c2.rows() != emissions) c2 = slice_rows(c2, c2.rows() - emissions, c2.rows());
  return second_stage(c2, take_rows(z_padded, last), train, rng);
}

template <typename T>
HeadOutput<T> StcnHead<T>::forward(const Var<T>& z, bool train, std::mt19937_64* rng) const {
  const int t = z.rows(), s = cfg_.block_shift;
  if (t < 1) throw ShapeError("stcn: empty embedding sequence");
  const int len = std::max(2 * s, (t + s - 1) / s * s);
  Var<T> zp = z;
  if (len != t) {
    std::vector<int> idx(len);
    for (int r = 0; r < len; ++r) idx[r] = std::min(r, t - 1);
    zp = take_rows(z, idx);
  }
  HeadOutput<T> out;
  out.logits = linear(unit(zp, train, rng), cls_w_, cls_b_);
  out.trajectory.times = emission_times(t, s);
  out.trajectory.scores = directed_posteriors(out.logits.value());
  out.trajectory.final_score = mean_of(out.trajectory.scores);
  return out;
}

template <typename T>
std::unique_ptr<typename SummaryHead<T>::State> StcnHead<T>::start() const {
  return std::make_unique<StreamState>();
}

template <typename T>
Tensor<T> StcnHead<T>::block_conv1(const Tensor<T>& z_block) const {
  return first_conv(constant(z_block), false, nullptr).value();
}

template <typename T>
double StcnHead<T>::block_score(const StreamState& st, const Tensor<T>& c1,
                                const Tensor<T>& z_last) const {
  // A block yields s2 conv1 rows. Conv2 taps [0, k2 - s2) read the previous
  // block (already summed into st.partial) and the rest read this one; both
  // halves form one FMA chain per output, matching the whole-utterance
  // convolution.
  const int c = cfg_.tcn_channels, prev_taps = cfg_.k2 - cfg_.s2;
  Tensor<T> acc = prev_taps == 0 ? Tensor<T>(1, c) : st.partial.clone();
  kernels::gemm_nn(1, c, cfg_.s2 * c, c1.data(), 0,
                   v2_.value().data() + static_cast<std::size_t>(prev_taps) * c * c, c,
                   acc.data(), c, prev_taps != 0);
  Var<T> e = second_stage(constant(std::move(acc)), constant(z_last), false, nullptr);
  return directed_posteriors(linear(e, cls_w_, cls_b_).value())[0];
}

template <typename T>
void StcnHead<T>::advance(StreamState& st, const Tensor<T>& c1) const {
  const int c = cfg_.tcn_channels, prev_taps = cfg_.k2 - cfg_.s2;
  if (prev_taps == 0) return;
  Tensor<T> next(1, c);
  kernels::gemm_nn(1, c, prev_taps * c,
                   c1.data() + static_cast<std::size_t>(cfg_.s2 - prev_taps) * c, 0,
                   v2_.value().data(), c, next.data(), c, false);
  st.partial = std::move(next);
}

template <typename T>
void StcnHead<T>::push(State& state, const Tensor<T>& z, ScoreTrajectory& traj) const {
  auto& st = static_cast<StreamState&>(state);
  const int s = cfg_.block_shift;
  check_open(st.frames, s);
  if (z.rows() < 1 || z.rows() > s) throw ShapeError("stcn push: chunk must have 1..S rows");
  NoGradGuard ng;
  Tensor<T> zc = pad_rows(z, s);
  Tensor<T> last = last_row(zc);
  st.frames += z.rows();
  Tensor<T> c1 = block_conv1(zc);
  if (st.frames > s) {
    traj.times.push_back(st.frames);
    traj.scores.push_back(block_score(st, c1, last));
  }
  advance(st, c1);
  if (st.frames <= s) {
    // Score for a stream that ends here: the 2S window is completed with
    // copies of the last frame. Computed now so no frame has to be kept.
    st.flush_score = block_score(st, block_conv1(pad_rows(last, s)), last);
  }
}

template <typename T>
void StcnHead<T>::finish(State& state, ScoreTrajectory& traj) const {
  auto& st = static_cast<StreamState&>(state);
  if (st.frames == 0) throw ShapeError("stcn finish: no frames consumed");
  if (st.frames <= cfg_.block_shift) {
    traj.times.push_back(st.frames);
    traj.scores.push_back(st.flush_score);
  }
  traj.final_score = mean_of(traj.scores);
}

// ---------------------------------------------------------------------------
// s-LSTM and the A2A LSTM head

template <typename T>
struct LstmHead<T>::StreamState : SummaryHead<T>::State {
  Tensor<T> h, c;
  std::deque<double> tail;
  std::size_t bytes() const override {
    return h.bytes() + c.bytes() + tail.size() * sizeof(double);
  }
};

namespace {

double tail_mean(const std::vector<double>& post, int end, int tail) {
  const int begin = std::max(0, end - tail);
  double s = 0;
  for (int i = begin; i < end; ++i) s += post[i];
  return s / (end - begin);
}

}  // namespace

template <typename T>
LstmHead<T>::LstmHead(const ModelConfig& cfg, ParamSet<T>& params, std::mt19937_64& rng,
                      bool streaming)
    : cfg_(cfg), streaming_(streaming) {
  cfg_.validate();
  const int d = cfg.d_model, hid = cfg.lstm_hidden;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hid));
  w_ih_ = params.add("ssl.lstm.w_ih", uniform_tensor<T>(d, 4 * hid, bound, rng));
  w_hh_ = params.add("ssl.lstm.w_hh", uniform_tensor<T>(hid, 4 * hid, bound, rng));
  Tensor<T> b(1, 4 * hid);
  for (int j = hid; j < 2 * hid; ++j) b[j] = T(1);  // forget gate
  b_ = params.add("ssl.lstm.b", std::move(b));
  cls_w_ = params.add("ssl.lstm.cls.w", glorot<T>(hid, 2, rng));
  cls_b_ = params.add("ssl.lstm.cls.b", Tensor<T>(1, 2));
}

template <typename T>
HeadOutput<T> LstmHead<T>::forward(const Var<T>& z, bool train, std::mt19937_64* rng) const {
  const int t = z.rows();
  if (t < 1) throw ShapeError("lstm head: empty embedding sequence");
  Var<T> h = maybe_dropout(lstm_sequence(z, w_ih_, w_hh_, b_), cfg_.dropout, train, rng);
  HeadOutput<T> out;
  out.logits = linear(h, cls_w_, cls_b_);
  out.frame_posteriors = directed_posteriors(out.logits.value());
  auto& tr = out.trajectory;
  tr.times = streaming_ ? emission_times(t, cfg_.block_shift) : std::vector<int>{t};
  for (int tau : tr.times) tr.scores.push_back(tail_mean(out.frame_posteriors, tau, cfg_.lstm_tail));
  tr.final_score = tr.scores.back();
  return out;
}

template <typename T>
std::unique_ptr<typename SummaryHead<T>::State> LstmHead<T>::start() const {
  auto st = std::make_unique<StreamState>();
  st->h = Tensor<T>(1, cfg_.lstm_hidden);
  st->c = Tensor<T>(1, cfg_.lstm_hidden);
  return st;
}

template <typename T>
void LstmHead<T>::push(State& state, const Tensor<T>& z, ScoreTrajectory& traj) const {
  auto& st = static_cast<StreamState&>(state);
  const int s = cfg_.block_shift;
  check_open(st.frames, s);
  if (z.rows() < 1 || z.rows() > s) throw ShapeError("lstm push: chunk must have 1..S rows");
  NoGradGuard ng;
  Tensor<T> h = lstm_forward(z, w_ih_.value(), w_hh_.value(), b_.value(), st.h, st.c);
  for (double p : directed_posteriors(linear(constant(h), cls_w_, cls_b_).value())) {
    st.tail.push_back(p);
    if (static_cast<int>(st.tail.size()) > cfg_.lstm_tail) st.tail.pop_front();
  }
  st.frames += z.rows();
  if (streaming_ && st.frames % s == 0 && st.frames >= 2 * s) {
    traj.times.push_back(st.frames);
    traj.scores.push_back(mean_of(std::vector<double>(st.tail.begin(), st.tail.end())));
  }
}

template <typename T>
void LstmHead<T>::finish(State& state, ScoreTrajectory& traj) const {
  auto& st = static_cast<StreamState&>(state);
  const int s = cfg_.block_shift;
  if (st.frames == 0) throw ShapeError("lstm finish: no frames consumed");
  if (!streaming_ || st.frames % s != 0 || st.frames < 2 * s) {
    traj.times.push_back(st.frames);
    traj.scores.push_back(mean_of(std::vector<double>(st.tail.begin(), st.tail.end())));
  }
  traj.final_score = traj.scores.back();
}

// ---------------------------------------------------------------------------
// s-AVE

template <typename T>
struct AverageHead<T>::StreamState : SummaryHead<T>::State {
  double sum = 0;
  std::size_t bytes() const override { return sizeof(double); }
};

template <typename T>
AverageHead<T>::AverageHead(const ModelConfig& cfg, ParamSet<T>& params, std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg.d_model;
  fc_w_ = params.add("ssl.save.fc.w", glorot<T>(d, d, rng));
  fc_b_ = params.add("ssl.save.fc.b", Tensor<T>(1, d));
  cls_w_ = params.add("ssl.save.cls.w", glorot<T>(d, 2, rng));
  cls_b_ = params.add("ssl.save.cls.b", Tensor<T>(1, 2));
}

template <typename T>
HeadOutput<T> AverageHead<T>::forward(const Var<T>& z, bool train, std::mt19937_64* rng) const {
  const int t = z.rows();
  if (t < 1) throw ShapeError("average head: empty embedding sequence");
  Var<T> h = maybe_dropout(relu(linear(z, fc_w_, fc_b_)), cfg_.dropout, train, rng);
  HeadOutput<T> out;
  out.logits = linear(h, cls_w_, cls_b_);
  out.frame_posteriors = directed_posteriors(out.logits.value());
  auto& tr = out.trajectory;
  tr.times = emission_times(t, cfg_.block_shift);
  double sum = 0;
  std::size_t next = 0;
  for (int i = 0; i < t; ++i) {
    sum += out.frame_posteriors[i];
    if (next < tr.times.size() && tr.times[next] == i + 1) {
      tr.scores.push_back(sum / (i + 1));
      ++next;
    }
  }
  tr.final_score = tr.scores.back();
  return out;
}

template <typename T>
std::unique_ptr<typename SummaryHead<T>::State> AverageHead<T>::start() const {
  return std::make_unique<StreamState>();
}

template <typename T>
void AverageHead<T>::push(State& state, const Tensor<T>& z, ScoreTrajectory& traj) const {
  auto& st = static_cast<StreamState&>(state);
  const int s = cfg_.block_shift;
  check_open(st.frames, s);
  if (z.rows() < 1 || z.rows() > s) throw ShapeError("average push: chunk must have 1..S rows");
  NoGradGuard ng;
  Tensor<T> logits = linear(relu(linear(constant(z), fc_w_, fc_b_)), cls_w_, cls_b_).value();
  for (double p : directed_posteriors(logits)) st.sum += p;
  st.frames += z.rows();
  if (st.frames % s == 0 && st.frames >= 2 * s) {
    traj.times.push_back(st.frames);
    traj.scores.push_back(st.sum / st.frames);
  }
}

template <typename T>
void AverageHead<T>::finish(State& state, ScoreTrajectory& traj) const {
  auto& st = static_cast<StreamState&>(state);
  const int s = cfg_.block_shift;
  if (st.frames == 0) throw ShapeError("average finish: no frames consumed");
  if (st.frames % s != 0 || st.frames < 2 * s) {
    traj.times.push_back(st.frames);
    traj.scores.push_back(st.sum / st.frames);
  }
  traj.final_score = traj.scores.back();
}

template <typename T>
std::unique_ptr<SummaryHead<T>> make_summary_head(const ModelConfig& cfg, ParamSet<T>& params,
                                                  std::mt19937_64& rng) {
  switch (cfg.summary_kind) {
    case SummaryKind::kStcn: return std::make_unique<StcnHead<T>>(cfg, params, rng);
    case SummaryKind::kSlstm: return std::make_unique<LstmHead<T>>(cfg, params, rng, true);
    case SummaryKind::kSave: return std::make_unique<AverageHead<T>>(cfg, params, rng);
    case SummaryKind::kA2aLstm: return std::make_unique<LstmHead<T>>(cfg, params, rng, false);
  }
  throw ConfigError("unknown summary kind");
}

template class StcnHead<float>;
template class StcnHead<double>;
template class LstmHead<float>;
template class LstmHead<double>;
template class AverageHead<float>;
template class AverageHead<double>;
template std::unique_ptr<SummaryHead<float>> make_summary_head(const ModelConfig&,
                                                               ParamSet<float>&,
                                                               std::mt19937_64&);
template std::unique_ptr<SummaryHead<double>> make_summary_head(const ModelConfig&,
                                                                ParamSet<double>&,
                                                                std::mt19937_64&);

}  // namespace ftm
