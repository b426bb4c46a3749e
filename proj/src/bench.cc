#include "ftm/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <set>

#include "ftm/errors.h"
#include "ftm/ledger.h"
#include "ftm/ops.h"

namespace ftm {
namespace {

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

}  // namespace

Tensor<float> bench_input(int frames, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 1.0f);
  Tensor<float> x(frames, dim);
  for (auto& v : x.flat()) v = n(rng);
  return x;
}

BenchRow bench_inference(const FtmModel<float>& model, const Tensor<float>& input, int repeats) {
  if (repeats < 3) throw ConfigError("bench.repeats must be at least 3");
  const ModelConfig& cfg = model.config();
  const bool streaming = is_streaming(cfg.summary_kind);
  if (streaming && input.rows() < 2 * cfg.block_shift)
    throw ShapeError("bench: streaming kinds need at least 2S = " +
                     std::to_string(2 * cfg.block_shift) + " frames, got " +
                     std::to_string(input.rows()));
  const auto run = [&] {
    return streaming ? model.score_streaming(input) : model.score(input);
  };
  BenchRow row;
  row.kind = cfg.summary_kind;
  row.frames = input.rows();
  row.repeats = repeats;
  row.peak_bytes = measure_peak([&] { run(); });
  std::vector<double> ms;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    run();
    ms.push_back(std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - t0).count());
  }
  row.median_ms = quantile(ms, 0.5);
  row.q1_ms = quantile(ms, 0.25);
  row.q3_ms = quantile(ms, 0.75);
  return row;
}

void fill_reductions(std::vector<BenchRow>& rows) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (auto& r : rows) {
    r.peak_reduction_pct = r.time_reduction_pct = nan;
    for (const auto& ref : rows) {
      if (ref.kind != SummaryKind::kA2aLstm || ref.frames != r.frames) continue;
      r.peak_reduction_pct = 100.0 * (static_cast<double>(ref.peak_bytes) -
                                      static_cast<double>(r.peak_bytes)) / ref.peak_bytes;
      r.time_reduction_pct = 100.0 * (ref.median_ms - r.median_ms) / ref.median_ms;
    }
  }
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeError("loglog_slope: x and y differ in length");
  if (std::set<double>(x.begin(), x.end()).size() < 4)
    throw ConfigError("scaling fit needs at least 4 distinct lengths, got " +
                      std::to_string(std::set<double>(x.begin(), x.end()).size()));
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0 && y[i] > 0)) throw DataError("scaling fit needs positive values");
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

std::map<SummaryKind, double> scaling_fit(const std::vector<BenchRow>& rows) {
  std::map<SummaryKind, std::pair<std::vector<double>, std::vector<double>>> by_kind;
  for (const auto& r : rows) {
    by_kind[r.kind].first.push_back(r.frames);
    by_kind[r.kind].second.push_back(r.median_ms);
  }
  std::map<SummaryKind, double> out;
  for (const auto& [kind, xy] : by_kind) out[kind] = loglog_slope(xy.first, xy.second);
  return out;
}

std::size_t a2a_attention_peak(int frames, int head_dim, std::uint64_t seed) {
  Tensor<float> q = bench_input(frames, head_dim, seed);
  Tensor<float> k = bench_input(frames, head_dim, seed + 1);
  NoGradGuard ng;
  Var<float> qv = constant(q), kv = constant(k);
  AttentionGeometry geom;
  geom.streaming_mask = false;
  return measure_peak([&] {
    Var<float> p = softmax_rows(masked_attention_scores(
        qv, kv, Var<float>(), geom, 1.0f / std::sqrt(static_cast<float>(head_dim))));
  });
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "kind,frames,peak_bytes,median_ms,q1_ms,q3_ms,repeats,peak_reduction_pct,"
         "time_reduction_pct\n"
      << std::setprecision(8);
  for (const auto& r : rows) {
    out << to_string(r.kind) << ',' << r.frames << ',' << r.peak_bytes << ',' << r.median_ms
        << ',' << r.q1_ms << ',' << r.q3_ms << ',' << r.repeats << ',';
    if (!std::isnan(r.peak_reduction_pct)) out << r.peak_reduction_pct;
    out << ',';
    if (!std::isnan(r.time_reduction_pct)) out << r.time_reduction_pct;
    out << '\n';
  }
}

void print_bench_table(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << std::left << std::setw(8) << "kind" << std::right << std::setw(8) << "frames"
      << std::setw(14) << "peak_bytes" << std::setw(12) << "median_ms" << std::setw(12)
      << "iqr_ms" << std::setw(10) << "pmc_red%" << std::setw(10) << "rtl_red%" << '\n';
  out << std::fixed;
  for (const auto& r : rows) {
    out << std::left << std::setw(8) << to_string(r.kind) << std::right << std::setw(8)
        << r.frames << std::setw(14) << r.peak_bytes << std::setw(12) << std::setprecision(3)
        << r.median_ms << std::setw(12) << (r.q3_ms - r.q1_ms) << std::setw(10)
        << std::setprecision(1) << r.peak_reduction_pct << std::setw(10)
        << r.time_reduction_pct << '\n';
  }
  out << std::defaultfloat;
}

}  // namespace ftm
