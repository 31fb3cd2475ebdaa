// SPDX-License-Identifier: Apache-2.0
#include "arrays.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hma/errors.hpp"

namespace hma::cli {

namespace {

constexpr char kMagic[8] = {'H', 'M', 'A', 'A', 'R', 'R', '1', '\0'};
constexpr std::uint32_t kFloat64 = 1;

static_assert(std::endian::native == std::endian::little, "HMAARR1 io assumes a little-endian host");

template <class T>
void put(std::ofstream& o, const T& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
bool get(std::ifstream& in, T& v) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(&v), sizeof(T)));
}

}  // namespace

void write_array(const std::filesystem::path& path, const Array& a) {
  std::uint64_t count = 1;
  for (auto e : a.shape) count *= e;
  if (count != a.data.size()) throw Error("write_array: shape does not match data size");
  std::ofstream o(path, std::ios::binary);
  if (!o) throw Error("write_array: cannot open " + path.string());
  o.write(kMagic, sizeof(kMagic));
  put(o, kFloat64);
  put(o, static_cast<std::uint32_t>(a.shape.size()));
  for (auto e : a.shape) put(o, e);
  o.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size() * sizeof(double)));
}

Array read_array(const std::filesystem::path& path, const std::string& field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(field, "array file not found: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw ConfigError(field, "not an HMAARR1 file: " + path.string());
  }
  std::uint32_t dtype = 0, rank = 0;
  if (!get(in, dtype) || !get(in, rank)) throw ConfigError(field, "truncated header");
  if (dtype != kFloat64) throw ConfigError(field, "unsupported dtype " + std::to_string(dtype));
  if (rank == 0 || rank > 8) throw ConfigError(field, "bad rank " + std::to_string(rank));
  Array a;
  a.shape.resize(rank);
  std::uint64_t count = 1;
  for (auto& e : a.shape) {
    if (!get(in, e) || e == 0) throw ConfigError(field, "bad extents");
    count *= e;
  }
  if (count > (std::uint64_t{1} << 32)) throw ConfigError(field, "array too large");
  a.data.resize(count);
  if (!in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(count * sizeof(double)))) {
    throw ConfigError(field, "truncated data");
  }
  return a;
}

}  // namespace hma::cli
