#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "patchnas/tensor.hpp"

namespace patchnas {

// FMAP feature file, little-endian:
//   "FMAP" | u32 version = 1 | u32 n_tensors |
//   n_tensors x (u8 stage | u16 C | u16 H | u16 W | C*H*W f32, row-major) |
//   u32 CRC-32 of every preceding byte.
inline constexpr std::uint32_t kFmapVersion = 1;

std::vector<std::uint8_t> encode_fmap(std::span<const StageTensor> tensors);
// Throws DataError on bad magic, version, truncation or CRC mismatch.
std::vector<StageTensor> decode_fmap(std::span<const std::uint8_t> bytes);
bool looks_like_fmap(std::span<const std::uint8_t> bytes);

void write_fmap(const std::filesystem::path& path, std::span<const StageTensor> tensors);
std::vector<StageTensor> read_fmap(const std::filesystem::path& path);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace patchnas
