#ifndef VOXTR_CORE_ARCHIVE_HPP_
#define VOXTR_CORE_ARCHIVE_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "voxtr/core/tensor.hpp"

namespace voxtr {

// Named-tensor archive, the on-disk format for checkpoints, pretrained
// weights, and probability-field sidecars.
//
// Layout (little-endian throughout):
//   magic   "VXTA" + version byte 0x01
//   u64     entry count
//   entry:  u16 name length, name bytes,
//           u8 dtype (0=f64, 1=f32, 2=i64, 3=u8),
//           u8 rank, u64 dims[rank],
//           raw element data
// Entries are sorted by name, so equal content produces equal bytes.
class TensorArchive {
 public:
  enum class DType : uint8_t { kF64 = 0, kF32 = 1, kI64 = 2, kU8 = 3 };

  void put(const std::string& name, const Tensor& t);      // stored as f64
  void put_f32(const std::string& name, const Tensor& t);  // stored as f32
  void put_i64(const std::string& name, const std::vector<int64_t>& v, Shape shape);
  void put_bytes(const std::string& name, const std::vector<uint8_t>& v);

  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;
  size_t size() const { return entries_.size(); }

  // f64 and f32 entries widen to a double Tensor.
  Tensor get(const std::string& name) const;
  std::vector<int64_t> get_i64(const std::string& name) const;
  std::vector<uint8_t> get_bytes(const std::string& name) const;
  Shape shape(const std::string& name) const;

  // Writes via a temp file in the same directory plus an atomic rename; the
  // temp file is removed on failure.
  void save(const std::string& path) const;
  static TensorArchive load(const std::string& path);

 private:
  struct Entry {
    DType dtype;
    Shape shape;
    std::vector<uint8_t> raw;
  };
  const Entry& entry(const std::string& name) const;
  std::map<std::string, Entry> entries_;
};

}  // namespace voxtr

#endif  // VOXTR_CORE_ARCHIVE_HPP_
