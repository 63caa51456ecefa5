#include "voxtr/core/archive.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "voxtr/core/errors.hpp"

namespace voxtr {

namespace {

constexpr char kMagic[5] = {'V', 'X', 'T', 'A', 0x01};

size_t dtype_size(TensorArchive::DType t) {
  switch (t) {
    case TensorArchive::DType::kF64: return 8;
    case TensorArchive::DType::kF32: return 4;
    case TensorArchive::DType::kI64: return 8;
    case TensorArchive::DType::kU8: return 1;
  }
  return 0;
}

template <typename T>
void append_pod(std::vector<uint8_t>& out, T v) {
  uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

template <typename T>
T read_pod(const std::vector<uint8_t>& in, size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("archive truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void TensorArchive::put(const std::string& name, const Tensor& t) {
  Entry e;
  e.dtype = DType::kF64;
  e.shape = t.shape();
  e.raw.resize(static_cast<size_t>(t.numel()) * 8);
  std::memcpy(e.raw.data(), t.data(), e.raw.size());
  entries_[name] = std::move(e);
}

void TensorArchive::put_f32(const std::string& name, const Tensor& t) {
  Entry e;
  e.dtype = DType::kF32;
  e.shape = t.shape();
  e.raw.resize(static_cast<size_t>(t.numel()) * 4);
  float* dst = reinterpret_cast<float*>(e.raw.data());
  for (long i = 0; i < t.numel(); ++i) dst[i] = static_cast<float>(t[i]);
  entries_[name] = std::move(e);
}

void TensorArchive::put_i64(const std::string& name, const std::vector<int64_t>& v, Shape shape) {
  if (shape_numel(shape) != static_cast<long>(v.size())) throw IoError("i64 entry shape mismatch: " + name);
  Entry e;
  e.dtype = DType::kI64;
  e.shape = std::move(shape);
  e.raw.resize(v.size() * 8);
  std::memcpy(e.raw.data(), v.data(), e.raw.size());
  entries_[name] = std::move(e);
}

void TensorArchive::put_bytes(const std::string& name, const std::vector<uint8_t>& v) {
  Entry e;
  e.dtype = DType::kU8;
  e.shape = {static_cast<long>(v.size())};
  e.raw = v;
  entries_[name] = std::move(e);
}

bool TensorArchive::contains(const std::string& name) const { return entries_.count(name) > 0; }

std::vector<std::string> TensorArchive::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

const TensorArchive::Entry& TensorArchive::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw IoError("archive entry not found: " + name);
  return it->second;
}

Tensor TensorArchive::get(const std::string& name) const {
  const Entry& e = entry(name);
  Tensor t(e.shape);
  if (e.dtype == DType::kF64) {
    std::memcpy(t.data(), e.raw.data(), e.raw.size());
  } else if (e.dtype == DType::kF32) {
    const float* src = reinterpret_cast<const float*>(e.raw.data());
    for (long i = 0; i < t.numel(); ++i) t[i] = static_cast<double>(src[i]);
  } else {
    throw IoError("archive entry " + name + " is not a float tensor");
  }
  return t;
}

std::vector<int64_t> TensorArchive::get_i64(const std::string& name) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::kI64) throw IoError("archive entry " + name + " is not i64");
  std::vector<int64_t> v(e.raw.size() / 8);
  std::memcpy(v.data(), e.raw.data(), e.raw.size());
  return v;
}

std::vector<uint8_t> TensorArchive::get_bytes(const std::string& name) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::kU8) throw IoError("archive entry " + name + " is not u8");
  return e.raw;
}

Shape TensorArchive::shape(const std::string& name) const { return entry(name).shape; }

void TensorArchive::save(const std::string& path) const {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 5);
  append_pod<uint64_t>(out, entries_.size());
  for (const auto& [name, e] : entries_) {
    if (name.size() > 0xffff) throw IoError("archive entry name too long: " + name);
    append_pod<uint16_t>(out, static_cast<uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    append_pod<uint8_t>(out, static_cast<uint8_t>(e.dtype));
    append_pod<uint8_t>(out, static_cast<uint8_t>(e.shape.size()));
    for (long d : e.shape) append_pod<uint64_t>(out, static_cast<uint64_t>(d));
    out.insert(out.end(), e.raw.begin(), e.raw.end());
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for write: " + tmp);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    f.flush();
    if (!f) {
      f.close();
      std::remove(tmp.c_str());
      throw IoError("write failed: " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("rename failed: " + path);
  }
}

TensorArchive TensorArchive::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::vector<uint8_t> in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  size_t pos = 0;
  if (in.size() < 5 || std::memcmp(in.data(), kMagic, 5) != 0) {
    throw IoError("bad archive magic: " + path);
  }
  pos = 5;
  uint64_t count = read_pod<uint64_t>(in, pos);
  TensorArchive ar;
  for (uint64_t i = 0; i < count; ++i) {
    uint16_t name_len = read_pod<uint16_t>(in, pos);
    if (pos + name_len > in.size()) throw IoError("archive truncated: " + path);
    std::string name(reinterpret_cast<const char*>(in.data() + pos), name_len);
    pos += name_len;
    Entry e;
    e.dtype = static_cast<DType>(read_pod<uint8_t>(in, pos));
    if (dtype_size(e.dtype) == 0) throw IoError("bad dtype in archive entry " + name);
    uint8_t rank = read_pod<uint8_t>(in, pos);
    e.shape.resize(rank);
    for (uint8_t d = 0; d < rank; ++d) e.shape[d] = static_cast<long>(read_pod<uint64_t>(in, pos));
    size_t bytes = static_cast<size_t>(shape_numel(e.shape)) * dtype_size(e.dtype);
    if (pos + bytes > in.size()) throw IoError("archive truncated in entry " + name);
    e.raw.assign(in.begin() + static_cast<long>(pos), in.begin() + static_cast<long>(pos + bytes));
    pos += bytes;
    ar.entries_[name] = std::move(e);
  }
  return ar;
}

}  // namespace voxtr
