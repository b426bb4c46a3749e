#include "ftm/bench.h"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ftm/errors.h"

namespace ftm {
namespace {

ModelConfig tiny(SummaryKind kind) {
  ModelConfig c = ModelConfig::desk();
  c.input_dim = 12;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ff = 32;
  c.block_shift = 8;
  c.k1 = c.s1 = 2;
  c.k2 = 8;
  c.s2 = 4;
  c.tcn_channels = 16;
  c.lstm_hidden = 16;
  c.lstm_tail = 4;
  c.summary_kind = kind;
  return c;
}

TEST(ScalingFit, RecoversExactPowerLaw) {
  std::vector<double> t{256, 512, 1024, 2048}, y;
  for (double x : t) y.push_back(3e-4 * x * x);
  EXPECT_NEAR(loglog_slope(t, y), 2.0, 1e-6);
  for (auto& v : y) v = std::sqrt(v);
  EXPECT_NEAR(loglog_slope(t, y), 1.0, 1e-6);
}

TEST(ScalingFit, NeedsFourLengths) {
  EXPECT_THROW(loglog_slope({1, 2, 4}, {1, 2, 4}), ConfigError);
  EXPECT_THROW(loglog_slope({1, 2, 2, 4}, {1, 2, 2, 4}), ConfigError);
  std::vector<BenchRow> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[i].frames = 64 << i;
    rows[i].median_ms = 1 + i;
  }
  EXPECT_THROW(scaling_fit(rows), ConfigError);
}

TEST(Reductions, RelativeToA2aOfSameLength) {
  std::vector<BenchRow> rows(3);
  rows[0].kind = SummaryKind::kA2aLstm;
  rows[0].frames = 128;
  rows[0].peak_bytes = 1000;
  rows[0].median_ms = 10;
  rows[1].kind = SummaryKind::kStcn;
  rows[1].frames = 128;
  rows[1].peak_bytes = 600;
  rows[1].median_ms = 5;
  rows[2].kind = SummaryKind::kStcn;
  rows[2].frames = 256;
  rows[2].peak_bytes = 600;
  rows[2].median_ms = 9;
  fill_reductions(rows);
  EXPECT_DOUBLE_EQ(rows[0].peak_reduction_pct, 0);
  EXPECT_DOUBLE_EQ(rows[1].peak_reduction_pct, 40);
  EXPECT_DOUBLE_EQ(rows[1].time_reduction_pct, 50);
  EXPECT_TRUE(std::isnan(rows[2].peak_reduction_pct));
}

TEST(AttentionPeak, QuadrupleWhenLengthDoubles) {
  for (int t : {64, 128, 256}) {
    const auto a = a2a_attention_peak(t, 8, 1);
    const auto b = a2a_attention_peak(2 * t, 8, 1);
    EXPECT_EQ(b, 4 * a) << t;
  }
}

TEST(BenchInference, Preconditions) {
  FtmModel<float> model(tiny(SummaryKind::kStcn), 1);
  auto x = bench_input(64, 12, 1);
  EXPECT_THROW(bench_inference(model, x, 2), ConfigError);
  EXPECT_THROW(bench_inference(model, bench_input(15, 12, 1), 3), ShapeError);
}

TEST(BenchInference, StreamingPeakIsFlatAndDeterministic) {
  for (auto kind : {SummaryKind::kStcn, SummaryKind::kSlstm, SummaryKind::kSave}) {
    FtmModel<float> model(tiny(kind), 2);
    const auto short_row = bench_inference(model, bench_input(64, 12, 3), 3);
    const auto long_row = bench_inference(model, bench_input(512, 12, 3), 3);
    EXPECT_EQ(short_row.peak_bytes, long_row.peak_bytes) << to_string(kind);
    EXPECT_EQ(bench_inference(model, bench_input(512, 12, 3), 3).peak_bytes,
              long_row.peak_bytes);
    EXPECT_GT(long_row.median_ms, 0);
    EXPECT_LE(long_row.q1_ms, long_row.median_ms);
    EXPECT_LE(long_row.median_ms, long_row.q3_ms);
  }
  FtmModel<float> a2a(tiny(SummaryKind::kA2aLstm), 2);
  EXPECT_GT(bench_inference(a2a, bench_input(256, 12, 3), 3).peak_bytes,
            2 * bench_inference(a2a, bench_input(128, 12, 3), 3).peak_bytes);
}

TEST(BenchCsv, HeaderAndRows) {
  std::vector<BenchRow> rows(2);
  rows[0].kind = SummaryKind::kA2aLstm;
  rows[0].frames = 64;
  rows[0].peak_bytes = 10;
  rows[0].median_ms = 1;
  rows[1].frames = 64;
  rows[1].peak_bytes = 5;
  rows[1].median_ms = 1;
  fill_reductions(rows);
  std::ostringstream out;
  write_bench_csv(out, rows);
  EXPECT_EQ(out.str(),
            "kind,frames,peak_bytes,median_ms,q1_ms,q3_ms,repeats,peak_reduction_pct,"
            "time_reduction_pct\n"
            "a2a,64,10,1,0,0,0,0,0\n"
            "stcn,64,5,1,0,0,0,50,0\n");
}

}  // namespace
}  // namespace ftm
