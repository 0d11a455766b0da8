#include "ragseg/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <fmt/format.h>
#include <zlib.h>

#include "ragseg/error.hpp"

namespace ragseg {

namespace {

constexpr std::uint32_t kFormatVersion = 1;
constexpr char kTensorMagic[4] = {'R', 'S', 'G', 'T'};
constexpr char kStoreMagic[4] = {'R', 'S', 'D', 'B'};
constexpr std::uint8_t kFlagNormalized = 0x01;

class ByteWriter {
 public:
  explicit ByteWriter(std::size_t reserve) { out_.reserve(reserve); }

  void raw(const char (&magic)[4]) {
    for (char c : magic) out_.push_back(static_cast<std::byte>(c));
  }
  void u8(std::uint8_t v) { out_.push_back(static_cast<std::byte>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::byte>& bytes() { return out_; }

 private:
  std::vector<std::byte> out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::byte> in) : in_(in) {}

  std::size_t remaining() const { return in_.size() - pos_; }

  bool magic_is(const char (&magic)[4]) {
    need(4);
    bool ok = true;
    for (int i = 0; i < 4; ++i) ok = ok && static_cast<char>(in_[pos_ + i]) == magic[i];
    pos_ += 4;
    return ok;
  }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(in_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError("truncated file");
  }

  std::span<const std::byte> in_;
  std::size_t pos_ = 0;
};

// Product of dims, or 0 on overflow.
std::uint64_t checked_numel(std::span<const std::uint64_t> dims, std::size_t elem_size) {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) {
    if (d != 0 && n > std::numeric_limits<std::uint64_t>::max() / d) return 0;
    n *= d;
  }
  if (n > std::numeric_limits<std::uint64_t>::max() / elem_size) return 0;
  return n;
}

void validate_shape(std::span<const std::uint64_t> dims, DType dtype) {
  if (dtype != DType::f32 && dtype != DType::u8) throw DataError("unsupported dtype");
  if (dims.empty() || dims.size() > 4) throw DataError(fmt::format("unsupported ndim {}", dims.size()));
  for (std::uint64_t d : dims) {
    if (d == 0) throw DataError("tensor dimensions must be positive");
  }
  if (checked_numel(dims, dtype_size(dtype)) == 0) throw DataError("dim overflow");
}

std::uint32_t crc32_of(std::span<const std::byte> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::size_t dtype_size(DType dtype) noexcept {
  switch (dtype) {
    case DType::f32:
      return 4;
    case DType::u8:
      return 1;
  }
  return 0;
}

Tensor Tensor::from_f32(std::vector<std::uint64_t> dims, std::vector<float> values) {
  validate_shape(dims, DType::f32);
  Tensor t(DType::f32, std::move(dims));
  if (values.size() != t.numel()) throw DataError("tensor: value count does not match dims");
  t.f32_ = std::move(values);
  return t;
}

Tensor Tensor::from_u8(std::vector<std::uint64_t> dims, std::vector<std::uint8_t> values) {
  validate_shape(dims, DType::u8);
  Tensor t(DType::u8, std::move(dims));
  if (values.size() != t.numel()) throw DataError("tensor: value count does not match dims");
  t.u8_ = std::move(values);
  return t;
}

std::size_t Tensor::numel() const noexcept {
  std::size_t n = 1;
  for (auto d : dims_) n *= static_cast<std::size_t>(d);
  return n;
}

std::span<const float> Tensor::f32() const {
  if (dtype_ != DType::f32) throw DataError("tensor is not f32");
  return f32_;
}

std::span<const std::uint8_t> Tensor::u8() const {
  if (dtype_ != DType::u8) throw DataError("tensor is not u8");
  return u8_;
}

std::uint64_t tensor_file_size(std::span<const std::uint64_t> dims, DType dtype) {
  validate_shape(dims, dtype);
  return kTensorHeaderBytes + 8 * dims.size() + checked_numel(dims, dtype_size(dtype)) * dtype_size(dtype);
}

std::uint64_t store_file_size(std::uint64_t k, std::uint64_t dim) {
  return kStoreHeaderBytes + k * dim * 4 + k * 4 + 4;
}

std::vector<std::byte> encode_tensor(const Tensor& tensor) {
  const auto dims = tensor.dims();
  ByteWriter w(tensor_file_size(dims, tensor.dtype()));
  w.raw(kTensorMagic);
  w.u32(kFormatVersion);
  w.u8(static_cast<std::uint8_t>(tensor.dtype()));
  w.u8(static_cast<std::uint8_t>(dims.size()));
  w.u8(0);
  w.u8(0);
  for (auto d : dims) w.u64(d);
  if (tensor.dtype() == DType::f32) {
    for (float v : tensor.f32()) w.f32(v);
  } else {
    for (std::uint8_t v : tensor.u8()) w.u8(v);
  }
  return std::move(w.bytes());
}

Tensor decode_tensor(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  if (!r.magic_is(kTensorMagic)) throw FormatError("bad magic");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) throw FormatError(fmt::format("version mismatch: {}", version));
  const auto dtype = static_cast<DType>(r.u8());
  const std::uint8_t ndim = r.u8();
  if (dtype != DType::f32 && dtype != DType::u8) throw FormatError("unsupported dtype");
  if (ndim < 1 || ndim > 4) throw FormatError(fmt::format("unsupported ndim {}", ndim));
  if (r.u8() != 0 || r.u8() != 0) throw FormatError("non-zero header padding");

  std::vector<std::uint64_t> dims(ndim);
  for (auto& d : dims) d = r.u64();
  for (auto d : dims) {
    if (d == 0) throw FormatError("zero dimension");
  }
  const std::uint64_t n = checked_numel(dims, dtype_size(dtype));
  if (n == 0) throw FormatError("dim overflow");
  const std::uint64_t payload = n * dtype_size(dtype);
  if (r.remaining() < payload) throw FormatError("truncated payload");
  if (r.remaining() > payload) throw FormatError("trailing bytes after payload");

  if (dtype == DType::f32) {
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32();
    return Tensor::from_f32(std::move(dims), std::move(values));
  }
  std::vector<std::uint8_t> values(n);
  for (auto& v : values) v = r.u8();
  return Tensor::from_u8(std::move(dims), std::move(values));
}

std::vector<std::byte> encode_store(const ClusteredStore& store) {
  const std::uint64_t k = store.size();
  const std::uint64_t d = store.dim();
  if (k > std::numeric_limits<std::uint32_t>::max() || d > std::numeric_limits<std::uint32_t>::max()) {
    throw DataError("store too large for the RSDB format");
  }
  ByteWriter w(store_file_size(k, d));
  w.raw(kStoreMagic);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(k));
  w.u32(static_cast<std::uint32_t>(d));
  w.u8(static_cast<std::uint8_t>(store.metric()));
  w.u8(store.normalized() ? kFlagNormalized : 0);
  w.u8(0);
  w.u8(0);
  for (float v : store.centroids()) w.f32(v);
  for (float v : store.mask_scores()) w.f32(v);
  auto& bytes = w.bytes();
  w.u32(crc32_of(std::span<const std::byte>(bytes).subspan(kStoreCrcOffset)));
  return std::move(bytes);
}

ClusteredStore decode_store(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  if (!r.magic_is(kStoreMagic)) throw FormatError("bad magic");
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) throw FormatError(fmt::format("version mismatch: {}", version));
  const std::uint64_t k = r.u32();
  const std::uint64_t d = r.u32();
  if (k == 0 || d == 0) throw FormatError("empty store");
  const std::uint8_t metric_code = r.u8();
  const std::uint8_t flags = r.u8();
  if (r.u8() != 0 || r.u8() != 0) throw FormatError("non-zero header padding");
  if (metric_code > 2) throw FormatError(fmt::format("unknown metric code {}", metric_code));
  if ((flags & ~kFlagNormalized) != 0) throw FormatError("unknown flag bits");

  const std::uint64_t expected = store_file_size(k, d);
  if (bytes.size() < expected) throw FormatError("truncated store");
  if (bytes.size() > expected) throw FormatError("trailing bytes after store");

  const auto body = bytes.subspan(kStoreCrcOffset, expected - kStoreCrcOffset - 4);
  std::vector<float> centroids(k * d);
  for (auto& v : centroids) v = r.f32();
  std::vector<float> scores(k);
  for (auto& v : scores) v = r.f32();
  const std::uint32_t stored_crc = r.u32();
  if (stored_crc != crc32_of(body)) throw FormatError("CRC mismatch");

  try {
    return ClusteredStore(d, std::move(centroids), std::move(scores),
                          static_cast<SimilarityMetric>(metric_code), (flags & kFlagNormalized) != 0);
  } catch (const DataError& e) {
    throw FormatError(fmt::format("invariant violation: {}", e.what()));
  }
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError(fmt::format("cannot open '{}' for reading", path.string()));
  const std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::byte> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size)) {
    throw IoError(fmt::format("failed reading '{}'", path.string()));
  }
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open '{}' for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("failed writing '{}'", path.string()));
}

void write_tensor(const std::filesystem::path& path, const Tensor& tensor) {
  write_file(path, encode_tensor(tensor));
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

void write_store(const std::filesystem::path& path, const ClusteredStore& store) {
  write_file(path, encode_store(store));
}

ClusteredStore read_store(const std::filesystem::path& path) { return decode_store(read_file(path)); }

}  // namespace ragseg
