// Named-tensor container ("FTMC").
//
//   magic "FTMC" | u32 version | u32 count
//   per tensor: u32 name_len | name bytes | u32 rank | u32 dims[rank] |
//               u8 dtype (0 = f32, 1 = f64) | little-endian payload
//
// Entries keep insertion order, so writing the same content twice produces
// identical bytes.

#ifndef FTM_CHECKPOINT_H_
#define FTM_CHECKPOINT_H_

#include <cstdint>
#include <string>
#include <vector>

#include "ftm/tensor.h"

namespace ftm {

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

class Checkpoint {
 public:
  static constexpr std::uint32_t kVersion = 1;

  struct Entry {
    std::string name;
    std::vector<std::uint32_t> dims;
    DType dtype = DType::kF32;
    std::vector<double> values;  // widened; narrowed again on write for f32
  };

  template <typename T>
  void put(const std::string& name, const Tensor<T>& t);
  template <typename T>
  Tensor<T> get(const std::string& name) const;

  bool contains(const std::string& name) const;
  const Entry& entry(const std::string& name) const;
  const std::vector<Entry>& entries() const { return entries_; }

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);

 private:
  std::vector<Entry> entries_;
};

}  // namespace ftm

#endif  // FTM_CHECKPOINT_H_
