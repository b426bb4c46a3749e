#include "ftm/checkpoint.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "ftm/byte_io.h"
#include "ftm/errors.h"

namespace ftm {

namespace byte_io {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path);
}

}  // namespace byte_io

template <typename T>
void Checkpoint::put(const std::string& name, const Tensor<T>& t) {
  Entry e;
  e.name = name;
  e.dims = {static_cast<std::uint32_t>(t.rows()), static_cast<std::uint32_t>(t.cols())};
  e.dtype = sizeof(T) == 4 ? DType::kF32 : DType::kF64;
  e.values.assign(t.data(), t.data() + t.size());
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const Entry& x) { return x.name == name; });
  if (it != entries_.end())
    *it = std::move(e);
  else
    entries_.push_back(std::move(e));
}

bool Checkpoint::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& x) { return x.name == name; });
}

const Checkpoint::Entry& Checkpoint::entry(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw DataError("checkpoint has no tensor named '" + name + "'");
}

template <typename T>
Tensor<T> Checkpoint::get(const std::string& name) const {
  const Entry& e = entry(name);
  int rows = 1, cols = 1;
  if (e.dims.size() == 1) {
    cols = static_cast<int>(e.dims[0]);
  } else if (e.dims.size() == 2) {
    rows = static_cast<int>(e.dims[0]);
    cols = static_cast<int>(e.dims[1]);
  } else {
    throw DataError("tensor '" + name + "' has unsupported rank " +
                    std::to_string(e.dims.size()));
  }
  Tensor<T> t(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(e.values[i]);
  return t;
}

std::string Checkpoint::serialize() const {
  std::string out = "FTMC";
  byte_io::put<std::uint32_t>(out, kVersion);
  byte_io::put<std::uint32_t>(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    byte_io::put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    byte_io::put<std::uint32_t>(out, static_cast<std::uint32_t>(e.dims.size()));
    for (auto d : e.dims) byte_io::put<std::uint32_t>(out, d);
    byte_io::put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype));
    for (double v : e.values) {
      if (e.dtype == DType::kF32)
        byte_io::put<float>(out, static_cast<float>(v));
      else
        byte_io::put<double>(out, v);
    }
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  byte_io::Reader in(bytes, "checkpoint");
  if (in.bytes(4) != "FTMC") throw DataError("checkpoint: bad magic (expected FTMC)");
  const auto version = in.get<std::uint32_t>();
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  const auto count = in.get<std::uint32_t>();
  Checkpoint ck;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    e.name = in.bytes(in.get<std::uint32_t>());
    const auto rank = in.get<std::uint32_t>();
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      e.dims.push_back(in.get<std::uint32_t>());
      n *= e.dims.back();
    }
    const auto tag = in.get<std::uint8_t>();
    if (tag > 1) throw DataError("checkpoint: unknown dtype tag " + std::to_string(tag));
    e.dtype = static_cast<DType>(tag);
    e.values.resize(n);
    for (auto& v : e.values)
      v = e.dtype == DType::kF32 ? static_cast<double>(in.get<float>()) : in.get<double>();
    ck.entries_.push_back(std::move(e));
  }
  if (!in.done()) throw DataError("checkpoint: trailing bytes");
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  byte_io::write_file(path, serialize());
}

Checkpoint Checkpoint::load(const std::string& path) {
  return deserialize(byte_io::read_file(path));
}

template void Checkpoint::put(const std::string&, const Tensor<float>&);
template void Checkpoint::put(const std::string&, const Tensor<double>&);
template Tensor<float> Checkpoint::get(const std::string&) const;
template Tensor<double> Checkpoint::get(const std::string&) const;

}  // namespace ftm
