#pragma once

// ".oht" tensor container:
//   "OHYP" | u32 version = 1 | u8 dtype (1 = f32, 2 = f64) | u8 ndim |
//   u64 dims[ndim] | payload (row-major)
// All integers and payload values are little-endian.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hypelift/errors.hpp"

namespace hypelift {

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

struct Tensor {
  std::vector<std::uint64_t> shape;  // empty for a scalar
  std::vector<double> values;        // row-major; f32 tensors hold widened floats
  DType dtype = DType::f64;

  static Tensor zeros(std::vector<std::uint64_t> shape, DType dtype = DType::f64);
  std::uint64_t element_count() const;
  bool operator==(const Tensor&) const = default;
};

void write_tensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace hypelift
