// Feature frontend: context stacking and frame subsampling of raw
// filterbank-style frames, plus the raw feature file format.
//
// Raw feature file ("FTMF"): magic "FTMF" | u32 version | u32 T | u32 dim,
// followed by T*dim row-major little-endian float32 values.

#ifndef FTM_FEATEXT_H_
#define FTM_FEATEXT_H_

#include <string>

#include "ftm/tensor.h"

namespace ftm {

struct FeatureSequence {
  Tensor<float> frames;         // T_sub x (base_dim * (2*context + 1))
  double frame_period_ms = 10;  // after subsampling
  int base_dim = 0;
  int context = 0;

  int length() const { return frames.rows(); }
  int dim() const { return frames.cols(); }
};

inline constexpr int kDefaultContext = 3;    // 40-D x 7 = 280-D
inline constexpr int kDefaultSubsample = 3;  // 10 ms -> 30 ms frames
inline constexpr double kRawFramePeriodMs = 10.0;

// Output frame i concatenates raw frames [i*subsample - context,
// i*subsample + context] with edge frames replicated. Output length is
// ceil(T / subsample).
FeatureSequence stack_and_subsample(const Tensor<float>& raw, int context, int subsample,
                                    double raw_period_ms = kRawFramePeriodMs);

void write_raw_features(const std::string& path, const Tensor<float>& raw);
Tensor<float> read_raw_features(const std::string& path);

std::string encode_raw_features(const Tensor<float>& raw);
Tensor<float> decode_raw_features(const std::string& bytes);

}  // namespace ftm

#endif  // FTM_FEATEXT_H_
