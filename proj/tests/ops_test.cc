#include "ftm/ops.h"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "ftm/errors.h"
#include "ftm/ledger.h"
#include "test_util.h"

namespace ftm {
namespace {

using testing::grad_check;
using testing::random_tensor;
using V = Var<double>;
using Vs = std::vector<V>;

constexpr double kPrimitiveTol = 1e-6;

V rparam(int r, int c, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  return parameter(random_tensor<double>(r, c, rng, lo, hi));
}

TEST(OpsTest, ReluExample) {
  auto x = constant(Tensor<float>::from(1, 3, {-1.f, 0.f, 2.f}));
  auto y = relu(x);
  EXPECT_EQ(y.value()[0], 0.f);
  EXPECT_EQ(y.value()[1], 0.f);
  EXPECT_EQ(y.value()[2], 2.f);
}

TEST(OpsTest, WeightNormWithGainEqualToNormIsIdentity) {
  std::mt19937_64 rng(1);
  auto v = random_tensor<double>(5, 3, rng);
  Tensor<double> g(1, 3);
  for (int c = 0; c < 3; ++c) {
    double s = 0;
    for (int r = 0; r < 5; ++r) s += v.at(r, c) * v.at(r, c);
    g[c] = std::sqrt(s);
  }
  auto w = weight_norm(constant(v), constant(g));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(w.value()[i], v[i], 1e-15);
}

TEST(OpsTest, SoftmaxRowsSumToOneAndLogSoftmaxAgrees) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = constant(random_tensor<float>(7, 11, rng, -8, 8));
    auto p = softmax_rows(x);
    auto lp = log_softmax_rows(x);
    for (int r = 0; r < 7; ++r) {
      double s = 0;
      for (int c = 0; c < 11; ++c) {
        s += p.value().at(r, c);
        EXPECT_NEAR(std::log(p.value().at(r, c)), lp.value().at(r, c), 1e-5);
      }
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(OpsTest, ShapeMismatchNamesOpAndShapes) {
  auto a = constant(Tensor<float>(2, 3));
  auto b = constant(Tensor<float>(4, 5));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos);
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[4x5]"), std::string::npos);
  }
  EXPECT_THROW(add(a, b), ShapeError);
}

TEST(OpsTest, DropoutIsIdentityAtInferenceAndRejectsBadRate) {
  std::mt19937_64 rng(3);
  auto x = constant(random_tensor<float>(4, 4, rng));
  auto y = dropout(x, 0.1, false, rng);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(y.value()[i], x.value()[i]);
  EXPECT_THROW(dropout(x, 1.0, true, rng), ShapeError);
  EXPECT_THROW(dropout(x, -0.1, true, rng), ShapeError);
}

TEST(OpsTest, DebugChecksSurfaceNaN) {
  set_debug_checks(true);
  auto x = constant(Tensor<float>::from(1, 2, {1.f, std::numeric_limits<float>::quiet_NaN()}));
  EXPECT_THROW(add(x, x), NumericError);
  set_debug_checks(false);
  EXPECT_NO_THROW(add(x, x));
}

// Causal padding: output i only depends on padded positions <= i*s + k - 1.
TEST(OpsTest, Conv1dCausalityIsBitExact) {
  std::mt19937_64 rng(4);
  const int k = 4, s = 2, pad = 3, len = 23, ch = 3;
  auto w = constant(random_tensor<float>(k * ch, 5, rng));
  auto b = constant(random_tensor<float>(1, 5, rng));
  auto x = random_tensor<float>(len, ch, rng);
  auto base = conv1d_strided(constant(x), w, b, k, s, pad).value();
  for (int perturb = 0; perturb < len; ++perturb) {
    auto x2 = x.clone();
    for (int c = 0; c < ch; ++c) x2.at(perturb, c) += 1.0f;
    auto out = conv1d_strided(constant(x2), w, b, k, s, pad).value();
    for (int i = 0; i < out.rows(); ++i) {
      const int last_padded = i * s + k - 1;
      if (perturb + pad > last_padded) {
        for (int c = 0; c < 5; ++c) ASSERT_EQ(out.at(i, c), base.at(i, c));
      }
    }
  }
}

TEST(OpsTest, FramesReplicatesEdges) {
  auto x = constant(Tensor<double>::from(3, 1, {1, 2, 3}));
  auto f = frames(x, 3, 2, 2, 2);  // padded: 1 1 1 2 3 3 3
  ASSERT_EQ(f.rows(), 3);
  std::vector<double> expect{1, 1, 1, 1, 2, 3, 3, 3, 3};
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(f.value()[i], expect[i]);
}

TEST(OpsTest, MaskedScoresFollowStreamingRule) {
  std::mt19937_64 rng(5);
  const int len = 9, s = 3;
  auto q = constant(random_tensor<double>(len, 2, rng));
  auto k = constant(random_tensor<double>(len, 2, rng));
  AttentionGeometry g{0, 0, s, true};
  auto sc = masked_attention_scores(q, k, V(), g, 1.0);
  for (int t = 0; t < len; ++t)
    for (int u = 0; u < len; ++u) {
      const bool allowed = u <= t && u >= s * (t / s - 1);
      EXPECT_EQ(sc.value().at(t, u) == kMaskedScore<double>, !allowed);
    }
}

// ---- finite-difference checks (double precision, step 1e-5) ----

TEST(GradCheck, Matmul) {
  std::mt19937_64 rng(10);
  auto r = grad_check({rparam(3, 4, rng), rparam(4, 5, rng)},
                      [](const Vs& v) { return matmul(v[0], v[1]); });
  EXPECT_LE(r.worst_relative_error, kPrimitiveTol);
}

TEST(GradCheck, ElementwiseArithmetic) {
  std::mt19937_64 rng(11);
  Vs in{rparam(3, 4, rng), rparam(3, 4, rng), rparam(1, 4, rng)};
  EXPECT_LE(grad_check(in, [](const Vs& v) { return add(v[0], v[1]); }).worst_relative_error,
            kPrimitiveTol);
  EXPECT_LE(grad_check(in, [](const Vs& v) { return sub(v[0], v[1]); }).worst_relative_error,
            kPrimitiveTol);
  EXPECT_LE(grad_check(in, [](const Vs& v) { return mul(v[0], v[1]); }).worst_relative_error,
            kPrimitiveTol);
  EXPECT_LE(grad_check(in, [](const Vs& v) { return scale(v[0], 2.5); }).worst_relative_error,
            kPrimitiveTol);
  EXPECT_LE(grad_check(in, [](const Vs& v) { return add_bias(v[0], v[2]); })
                .worst_relative_error,
            kPrimitiveTol);
}

TEST(GradCheck, Linear) {
  std::mt19937_64 rng(12);
  auto r = grad_check({rparam(5, 3, rng), rparam(3, 4, rng), rparam(1, 4, rng)},
                      [](const Vs& v) { return linear(v[0], v[1], v[2]); });
  EXPECT_LE(r.worst_relative_error, kPrimitiveTol);
}

TEST(GradCheck, ConcatSliceTake) {
  std::mt19937_64 rng(13);
  Vs in{rparam(3, 4, rng), rparam(2, 4, rng), rparam(3, 2, rng)};
  EXPECT_LE(grad_check(in, [](const Vs& v) { return concat_rows(Vs{v[0], v[1]}); })
                .worst_relative_error,
            kPrimitiveTol);
  EXPECT_LE(grad_check(in, [](const Vs& v) { return concat_cols(Vs{v[0], v[2]}); })
                .worst_relative_error,
            kPrimitiveTol);
  EXPECT_LE(grad_check(in, [](const Vs& v) { return slice_rows(v[0], 1, 3); })
                .worst_relative_error,
            kPrimitiveTol);
  EXPECT_LE(grad_check(in, [](const Vs& v) { return slice_cols(v[0], 1, 3); })
                .worst_relative_error,
            kPrimitiveTol);
  EXPECT_LE(grad_check(in, [](const Vs& v) { return take_rows(v[0], {2, 0, 2}); })
                .worst_relative_error,
            kPrimitiveTol);
}

TEST(GradCheck, Activations) {
  std::mt19937_64 rng(14);
  // Keep relu inputs away from the kink.
  auto x = random_tensor<double>(4, 5, rng);
  for (auto& v : x.flat()) v += v >= 0 ? 0.1 : -0.1;
  Vs in{parameter(x)};
  for (auto fn : std::vector<std::function<V(const Vs&)>>{
           [](const Vs& v) { return relu(v[0]); },
           [](const Vs& v) { return sigmoid(v[0]); },
           [](const Vs& v) { return ftm::tanh(v[0]); },
           [](const Vs& v) { return softmax_rows(v[0]); },
           [](const Vs& v) { return log_softmax_rows(v[0]); }}) {
    EXPECT_LE(grad_check(in, fn).worst_relative_error, kPrimitiveTol);
  }
}

TEST(GradCheck, DropoutWithFixedMask) {
  std::mt19937_64 rng(15);
  auto r = grad_check({rparam(4, 6, rng)}, [](const Vs& v) {
    std::mt19937_64 local(99);
    return dropout(v[0], 0.3, true, local);
  });
  EXPECT_LE(r.worst_relative_error, kPrimitiveTol);
}

TEST(GradCheck, LayerNorm) {
  std::mt19937_64 rng(16);
  auto r = grad_check({rparam(4, 6, rng), rparam(1, 6, rng), rparam(1, 6, rng)},
                      [](const Vs& v) { return layer_norm(v[0], v[1], v[2]); });
  EXPECT_LE(r.worst_relative_error, kPrimitiveTol);
}

TEST(GradCheck, WeightNorm) {
  std::mt19937_64 rng(17);
  auto r = grad_check({rparam(5, 3, rng), rparam(1, 3, rng, 0.5, 1.5)},
                      [](const Vs& v) { return weight_norm(v[0], v[1]); });
  EXPECT_LE(r.worst_relative_error, kPrimitiveTol);
}

TEST(GradCheck, StridedConvolutionWithPadding) {
  std::mt19937_64 rng(18);
  auto r = grad_check({rparam(11, 3, rng), rparam(4 * 3, 2, rng), rparam(1, 2, rng)},
                      [](const Vs& v) { return conv1d_strided(v[0], v[1], v[2], 4, 2, 3); });
  EXPECT_LE(r.worst_relative_error, kPrimitiveTol);
}

TEST(GradCheck, Reductions) {
  std::mt19937_64 rng(19);
  Vs in{rparam(4, 3, rng)};
  EXPECT_LE(grad_check(in, [](const Vs& v) { return mean_rows(v[0]); }).worst_relative_error,
            kPrimitiveTol);
  EXPECT_LE(grad_check(in, [](const Vs& v) { return mean_all(v[0]); }).worst_relative_error,
            kPrimitiveTol);
  EXPECT_LE(grad_check(in, [](const Vs& v) { return sum_all(v[0]); }).worst_relative_error,
            kPrimitiveTol);
}

TEST(GradCheck, CrossEntropy) {
  std::mt19937_64 rng(20);
  Vs in{rparam(5, 3, rng, -2, 2)};
  EXPECT_LE(grad_check(in, [](const Vs& v) {
              return cross_entropy(v[0], {0, 2, 1, 1, 0});
            }).worst_relative_error,
            kPrimitiveTol);
  EXPECT_LE(grad_check(in, [](const Vs& v) {
              return cross_entropy(v[0], {0, 2, 1, 1, 0}, {1.0, 0.5, 2.0, 1.0, 0.0});
            }).worst_relative_error,
            kPrimitiveTol);
}

TEST(GradCheck, MaskedAttentionScores) {
  std::mt19937_64 rng(21);
  const int s = 2;
  for (bool streaming : {true, false}) {
    AttentionGeometry g{4, 2, s, streaming};
    auto r = grad_check({rparam(4, 3, rng), rparam(6, 3, rng), rparam(1, 4 * s - 1, rng)},
                        [&](const Vs& v) {
                          // Push through softmax so masked entries matter.
                          return softmax_rows(masked_attention_scores(v[0], v[1], v[2], g, 0.7));
                        });
    EXPECT_LE(r.worst_relative_error, kPrimitiveTol) << "streaming=" << streaming;
  }
}

TEST(GradCheck, LstmSequence) {
  std::mt19937_64 rng(22);
  const int in = 3, hid = 4;
  auto r = grad_check({rparam(6, in, rng), rparam(in, 4 * hid, rng, -0.5, 0.5),
                       rparam(hid, 4 * hid, rng, -0.5, 0.5), rparam(1, 4 * hid, rng)},
                      [](const Vs& v) { return lstm_sequence(v[0], v[1], v[2], v[3]); });
  EXPECT_LE(r.worst_relative_error, kPrimitiveTol);
}

TEST(OpsTest, LstmForwardMatchesSequenceOp) {
  std::mt19937_64 rng(23);
  auto x = random_tensor<float>(9, 3, rng);
  auto wih = random_tensor<float>(3, 8, rng);
  auto whh = random_tensor<float>(2, 8, rng);
  auto b = random_tensor<float>(1, 8, rng);
  auto full = lstm_sequence(constant(x), constant(wih), constant(whh), constant(b)).value();
  Tensor<float> h(1, 2), c(1, 2);
  // Feed in two pieces; state carries across.
  Tensor<float> x1(4, 3), x2(5, 3);
  std::copy(x.data(), x.data() + 12, x1.data());
  std::copy(x.data() + 12, x.data() + 27, x2.data());
  auto o1 = lstm_forward(x1, wih, whh, b, h, c);
  auto o2 = lstm_forward(x2, wih, whh, b, h, c);
  for (int j = 0; j < 8; ++j) EXPECT_EQ(o1[j], full[j]);
  for (int j = 0; j < 10; ++j) EXPECT_EQ(o2[j], full[8 + j]);
}

// ---- allocation ledger ----

TEST(LedgerTest, SingleTensorPeak) {
  const auto peak = measure_peak([] { Tensor<float> t(4, 4); });
  EXPECT_EQ(peak, 64u);
}

TEST(LedgerTest, SequentialLifetimesDoNotStack) {
  const auto peak = measure_peak([] {
    { Tensor<float> a(4, 4); }
    { Tensor<float> b(4, 4); }
  });
  EXPECT_EQ(peak, 64u);
}

TEST(LedgerTest, OverlappingLifetimesStack) {
  const auto peak = measure_peak([] {
    Tensor<float> a(4, 4);
    Tensor<float> b(4, 4);
  });
  EXPECT_EQ(peak, 128u);
}

TEST(LedgerTest, NestedScopesRejected) {
  PeakScope outer;
  EXPECT_THROW(PeakScope inner, std::logic_error);
}

TEST(LedgerTest, PeakMatchesReplayOfEventLog) {
  auto& ledger = AllocationLedger::current();
  std::mt19937_64 rng(30);
  ledger.set_recording(true);
  std::size_t peak = 0;
  {
    PeakScope scope;
    std::vector<Tensor<double>> live;
    std::uniform_int_distribution<int> sz(1, 50);
    for (int i = 0; i < 200; ++i) {
      if (!live.empty() && rng() % 3 == 0)
        live.erase(live.begin() + static_cast<long>(rng() % live.size()));
      else
        live.emplace_back(sz(rng), sz(rng));
    }
    live.clear();
    peak = scope.peak();
  }
  std::int64_t cur = 0, brute = 0;
  for (const auto& e : ledger.events()) {
    cur += e.delta;
    brute = std::max(brute, cur);
  }
  ledger.set_recording(false);
  EXPECT_EQ(static_cast<std::int64_t>(peak), brute);
  EXPECT_GE(ledger.peak_bytes(), ledger.live_bytes());
}

}  // namespace
}  // namespace ftm
