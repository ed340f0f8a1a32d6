#pragma once

// ATSR tensor files and atomic file writes.
//
// Layout: "ATSR" | u32 version (1) | u32 dtype (1 = f64) | u32 rank |
// u64 extents[rank] | row-major little-endian f64 payload. Integers are
// little-endian too.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "attribroi/tensor.hpp"

namespace attribroi {

inline constexpr std::uint32_t kAtsrVersion = 1;
inline constexpr std::uint32_t kAtsrDtypeF64 = 1;

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes);  // ParseError carries byte offset

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

// All persistence goes through write-then-rename so readers never observe a
// half-written file.
void atomic_write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace attribroi
