// SPDX-License-Identifier: Apache-2.0
//
// HMAARR1 arrays: 8-byte magic "HMAARR1\0", uint32 dtype (1 = float64),
// uint32 rank, rank x uint64 extents, then row-major little-endian data.
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace hma::cli {

struct Array {
  std::vector<std::uint64_t> shape;
  std::vector<double> data;
};

void write_array(const std::filesystem::path& path, const Array& a);
/// Throws ConfigError naming `field` on a missing or malformed file.
Array read_array(const std::filesystem::path& path, const std::string& field);

}  // namespace hma::cli
