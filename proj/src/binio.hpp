#pragma once

#include "spdfuse/error.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

namespace spdfuse::binio {

static_assert(std::endian::native == std::endian::little,
              "artifact formats are little-endian; add byte swapping for this host");

inline void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
inline void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

inline void check(std::istream& is, const std::string& what) {
  if (!is) throw Error(ErrorCode::BadArtifact, "truncated " + what);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  check(is, what);
  return v;
}

inline std::uint64_t get_u64(std::istream& is, const std::string& what) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  check(is, what);
  return v;
}

inline double get_f64(std::istream& is, const std::string& what) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  check(is, what);
  return v;
}

inline void expect_magic(std::istream& is, const char (&magic)[9], const std::string& what) {
  char buf[8] = {};
  is.read(buf, 8);
  check(is, what);
  if (std::memcmp(buf, magic, 8) != 0) throw Error(ErrorCode::BadArtifact, "bad magic in " + what);
}

}  // namespace spdfuse::binio
