#pragma once

// RGBD raster container:
//
//   RGBD1\n
//   W H C\n            (ASCII decimal)
//   little-endian\n
//   W*H*C float32 little-endian values, row-major (row, col, channel)
//
// Images use C = 3 (`.rgb`), depth maps C = 1 (`.dep`).

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "sarpn/feature_map.hpp"

namespace sarpn {

/// Serialises `map` (values narrowed to float32).
std::string encode_raster(const FeatureMap& map);

/// Parses one raster starting at `bytes[0]`. `consumed` receives the number
/// of bytes used; trailing data is allowed only when `consumed` is non-null.
/// Errors are FormatError with offsets relative to `base_offset`.
FeatureMap decode_raster(std::string_view bytes, std::size_t* consumed = nullptr,
                         std::uint64_t base_offset = 0);

void write_raster(const std::filesystem::path& path, const FeatureMap& map);
FeatureMap read_raster(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace sarpn
