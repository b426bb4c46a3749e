#include "ftm/featext.h"

#include <algorithm>
#include <cmath>

#include "ftm/byte_io.h"
#include "ftm/errors.h"

namespace ftm {

FeatureSequence stack_and_subsample(const Tensor<float>& raw, int context, int subsample,
                                    double raw_period_ms) {
  if (raw.rows() < 1 || raw.cols() < 1) throw DataError("empty feature matrix");
  if (context < 0) throw ShapeError("stack_and_subsample: context must be >= 0");
  if (subsample < 1) throw ShapeError("stack_and_subsample: subsample must be >= 1");
  const int len = raw.rows(), dim = raw.cols(), width = 2 * context + 1;
  const int out_len = (len + subsample - 1) / subsample;
  FeatureSequence seq;
  seq.frames = Tensor<float>(out_len, dim * width);
  seq.frame_period_ms = raw_period_ms * subsample;
  seq.base_dim = dim;
  seq.context = context;
  for (int i = 0; i < out_len; ++i) {
    const int center = i * subsample;
    float* dst = seq.frames.data() + static_cast<std::size_t>(i) * dim * width;
    for (int j = -context; j <= context; ++j) {
      auto src = raw.row(std::clamp(center + j, 0, len - 1));
      std::copy(src.begin(), src.end(), dst + static_cast<std::size_t>(j + context) * dim);
    }
  }
  return seq;
}

std::string encode_raw_features(const Tensor<float>& raw) {
  std::string out = "FTMF";
  byte_io::put<std::uint32_t>(out, 1);
  byte_io::put<std::uint32_t>(out, static_cast<std::uint32_t>(raw.rows()));
  byte_io::put<std::uint32_t>(out, static_cast<std::uint32_t>(raw.cols()));
  out.reserve(out.size() + raw.size() * 4);
  for (float v : raw.flat()) byte_io::put<float>(out, v);
  return out;
}

Tensor<float> decode_raw_features(const std::string& bytes) {
  byte_io::Reader in(bytes, "feature file");
  if (in.bytes(4) != "FTMF") throw DataError("feature file: bad magic (expected FTMF)");
  const auto version = in.get<std::uint32_t>();
  if (version != 1)
    throw DataError("feature file: unsupported version " + std::to_string(version));
  const auto rows = in.get<std::uint32_t>();
  const auto cols = in.get<std::uint32_t>();
  Tensor<float> raw(static_cast<int>(rows), static_cast<int>(cols));
  for (auto& v : raw.flat()) {
    v = in.get<float>();
    if (!std::isfinite(v)) throw DataError("feature file: non-finite value");
  }
  if (!in.done()) throw DataError("feature file: trailing bytes");
  return raw;
}

void write_raw_features(const std::string& path, const Tensor<float>& raw) {
  byte_io::write_file(path, encode_raw_features(raw));
}

Tensor<float> read_raw_features(const std::string& path) {
  return decode_raw_features(byte_io::read_file(path));
}

}  // namespace ftm
