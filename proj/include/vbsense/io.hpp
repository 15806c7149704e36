#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "vbsense/errors.hpp"
#include "vbsense/grid.hpp"

namespace vbsense::io {

using nlohmann::json;

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xCBF29CE484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Portable array container: little-endian float64 planes plus a JSON
/// header describing the grid and plane names. Used for field snapshots,
/// beam tomographies and look-up tables.
///
/// Layout: magic "VBSA", uint32 LE header length, header JSON (UTF-8),
/// then the planes back to back, row-major, 64-bit LE floats.
struct ArrayFile {
  GridGeometry geometry;
  json meta;  // free-form extras (wavelength, z, shape, ...)
  std::vector<std::string> plane_names;
  std::vector<Array2D<double>> planes;

  const Array2D<double>& plane(const std::string& name) const {
    for (std::size_t k = 0; k < plane_names.size(); ++k)
      if (plane_names[k] == name) return planes[k];
    throw parse_error("array file: missing plane '" + name + "'");
  }
};

inline void save_array_file(const ArrayFile& a, const std::string& path) {
  std::size_t payload_bytes = 0;
  std::uint64_t hash = 0xCBF29CE484222325ull;
  for (const auto& p : a.planes) {
    hash = fnv1a64(p.data(), p.size() * sizeof(double), hash);
    payload_bytes += p.size() * sizeof(double);
  }
  json header = {
      {"format", "vbsense-array"},
      {"version", 1},
      {"nx", a.geometry.nx},
      {"ny", a.geometry.ny},
      {"dx", a.geometry.dx},
      {"dy", a.geometry.dy},
      {"planes", a.plane_names},
      {"payload_hash", hex64(hash)},
      {"meta", a.meta},
  };
  const std::string h = header.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw parse_error("cannot open for writing: " + path);
  f.write("VBSA", 4);
  const std::uint32_t hlen = static_cast<std::uint32_t>(h.size());
  char lenbuf[4] = {char(hlen & 0xFF), char((hlen >> 8) & 0xFF), char((hlen >> 16) & 0xFF), char((hlen >> 24) & 0xFF)};
  f.write(lenbuf, 4);
  f.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& p : a.planes)
    f.write(reinterpret_cast<const char*>(p.data()),
            static_cast<std::streamsize>(p.size() * sizeof(double)));
  if (!f) throw parse_error("write failed: " + path);
}

inline ArrayFile load_array_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw parse_error("cannot open: " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, "VBSA", 4) != 0)
    throw parse_error("not a vbsense array file: " + path);
  unsigned char lenbuf[4];
  f.read(reinterpret_cast<char*>(lenbuf), 4);
  const std::uint32_t hlen = lenbuf[0] | (lenbuf[1] << 8) | (lenbuf[2] << 16) | (std::uint32_t(lenbuf[3]) << 24);
  std::string h(hlen, '\0');
  f.read(h.data(), hlen);
  if (!f) throw parse_error("truncated header: " + path);
  json header;
  try {
    header = json::parse(h);
  } catch (const json::exception& e) {
    throw parse_error("bad array header in " + path + ": " + e.what());
  }
  ArrayFile a;
  a.geometry = GridGeometry(header.at("nx").get<int>(), header.at("ny").get<int>(),
                            header.at("dx").get<double>(), header.at("dy").get<double>());
  a.plane_names = header.at("planes").get<std::vector<std::string>>();
  a.meta = header.value("meta", json::object());
  std::uint64_t hash = 0xCBF29CE484222325ull;
  for (std::size_t k = 0; k < a.plane_names.size(); ++k) {
    Array2D<double> p(a.geometry.nx, a.geometry.ny);
    f.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!f) throw parse_error("truncated payload: " + path);
    hash = fnv1a64(p.data(), p.size() * sizeof(double), hash);
    a.planes.push_back(std::move(p));
  }
  if (header.contains("payload_hash") && header.at("payload_hash").get<std::string>() != hex64(hash))
    throw parse_error("integrity error: payload hash mismatch in " + path);
  return a;
}

}  // namespace vbsense::io
