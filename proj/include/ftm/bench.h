// Inference peak-memory and latency measurement.
//
// Peak memory is the ledger high-water mark of tensor bytes allocated during
// one inference call, so weights and the input sequence (both live before the
// call) are excluded. Streaming kinds consume the input S frames at a time;
// A2A encodes the whole sequence at once.

#ifndef FTM_BENCH_H_
#define FTM_BENCH_H_

#include <cstdint>
#include <map>
#include <ostream>
#include <vector>

#include "ftm/model.h"

namespace ftm {

struct BenchRow {
  SummaryKind kind = SummaryKind::kStcn;
  int frames = 0;
  std::size_t peak_bytes = 0;
  double median_ms = 0;
  double q1_ms = 0, q3_ms = 0;
  int repeats = 0;
  // 100 * (A2A - this) / A2A for the same length; NaN without an A2A row.
  double peak_reduction_pct = 0;
  double time_reduction_pct = 0;
};

// Input of `frames` rows drawn from N(0, 1), seeded.
Tensor<float> bench_input(int frames, int dim, std::uint64_t seed);

// One warm-up call, then `repeats` timed calls. Throws ConfigError when
// repeats < 3 and ShapeError when a streaming kind gets fewer than 2S frames.
BenchRow bench_inference(const FtmModel<float>& model, const Tensor<float>& input, int repeats);

// Fills the reduction columns from the A2A rows of the same length.
void fill_reductions(std::vector<BenchRow>& rows);

// Least-squares slope of log(y) against log(x). Throws ConfigError with fewer
// than 4 distinct x values.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Slope of median time against length for each kind present in rows.
std::map<SummaryKind, double> scaling_fit(const std::vector<BenchRow>& rows);

// Peak bytes of the full-sequence attention scores and softmax for one head
// over `frames` positions: the component that grows as T^2 in A2A.
std::size_t a2a_attention_peak(int frames, int head_dim, std::uint64_t seed);

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);
void print_bench_table(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace ftm

#endif  // FTM_BENCH_H_
