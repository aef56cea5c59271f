#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include "dseno/core/tensor.hpp"

namespace dseno::io {

// DSNT layout, all integers little-endian:
//   "DSNT" | u16 version (1) | u8 dtype (0 float32, 1 float64) | u8 rank |
//   rank x u64 dims | row-major payload.
inline constexpr std::uint16_t kTensorFileVersion = 1;

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

struct TensorHeader {
    DType dtype = DType::float32;
    Shape shape;
};

template <Scalar T>
std::string encode_tensor(const Tensor<T>& t);

/// `source` names the bytes in error messages. Throws DataError(corrupt_file)
/// on bad magic, unknown version or dtype, zero extents, truncated payload or
/// trailing bytes.
AnyTensor decode_tensor(std::string_view bytes, const std::string& source);

/// Writes through a temporary file and a rename.
template <Scalar T>
void write_tensor(const std::filesystem::path& path, const Tensor<T>& t);

AnyTensor read_tensor(const std::filesystem::path& path);
TensorHeader read_tensor_header(const std::filesystem::path& path);

/// Reads and converts to T when the stored dtype differs.
template <Scalar T>
Tensor<T> read_tensor_as(const std::filesystem::path& path);

/// Reads and requires the stored dtype to be T (Errc::dtype_mismatch otherwise).
template <Scalar T>
Tensor<T> read_tensor_exact(const std::filesystem::path& path);

DType stored_dtype(const AnyTensor& t) noexcept;
const Shape& shape_of(const AnyTensor& t) noexcept;

}  // namespace dseno::io
