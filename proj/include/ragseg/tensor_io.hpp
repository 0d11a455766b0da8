#pragma once

// Binary exchange formats shared with the Python bridge.
//
// RSGT tensor file (little-endian):
//   0  magic "RSGT"
//   4  u32 version = 1
//   8  u8  dtype (1 = f32, 2 = u8)
//   9  u8  ndim (1..4)
//  10  2 zero bytes
//  12  ndim x u64 dims
//      payload, row-major
//
// RSDB store file (little-endian):
//   0  magic "RSDB"
//   4  u32 version = 1
//   8  u32 K
//  12  u32 D
//  16  u8  metric code (0 ip, 1 cosine, 2 l2)
//  17  u8  flags (bit 0: rows L2-normalized)
//  18  2 zero bytes
//  20  K x D f32 centroids
//      K f32 mask scores
//      u32 CRC-32 (IEEE) of bytes [16, size - 4)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ragseg/clustered_store.hpp"

namespace ragseg {

enum class DType : std::uint8_t {
  f32 = 1,
  u8 = 2,
};

std::size_t dtype_size(DType dtype) noexcept;

/// Dense row-major tensor with 1 to 4 dimensions.
class Tensor {
 public:
  static Tensor from_f32(std::vector<std::uint64_t> dims, std::vector<float> values);
  static Tensor from_u8(std::vector<std::uint64_t> dims, std::vector<std::uint8_t> values);

  DType dtype() const noexcept { return dtype_; }
  std::span<const std::uint64_t> dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t numel() const noexcept;

  /// Typed views; throw DataError on dtype mismatch.
  std::span<const float> f32() const;
  std::span<const std::uint8_t> u8() const;

  bool operator==(const Tensor&) const = default;

 private:
  Tensor(DType dtype, std::vector<std::uint64_t> dims) : dtype_(dtype), dims_(std::move(dims)) {}

  DType dtype_;
  std::vector<std::uint64_t> dims_;
  std::vector<float> f32_;
  std::vector<std::uint8_t> u8_;
};

inline constexpr std::size_t kTensorHeaderBytes = 12;
inline constexpr std::size_t kStoreHeaderBytes = 20;
inline constexpr std::size_t kStoreCrcOffset = 16;

std::uint64_t tensor_file_size(std::span<const std::uint64_t> dims, DType dtype);
std::uint64_t store_file_size(std::uint64_t k, std::uint64_t dim);

std::vector<std::byte> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::byte> bytes);

std::vector<std::byte> encode_store(const ClusteredStore& store);
ClusteredStore decode_store(std::span<const std::byte> bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

void write_store(const std::filesystem::path& path, const ClusteredStore& store);
ClusteredStore read_store(const std::filesystem::path& path);

// Raw file helpers, also used by the JSON/CSV writers.
std::vector<std::byte> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace ragseg
