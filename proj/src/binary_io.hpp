#pragma once

// Little-endian primitive encoding shared by the SVOL, SWGT and SPLT formats.

#include "simplicits/common.hpp"

#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace simplicits::binary {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <class T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.write(bytes, sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& what) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  if (!in.read(bytes, sizeof(T))) throw InputError(what + ": truncated file");
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

inline void put_magic(std::ostream& out, const char (&magic)[5]) { out.write(magic, 4); }

inline void expect_magic(std::istream& in, const char (&magic)[5], const std::string& what) {
  char bytes[4];
  if (!in.read(bytes, 4)) throw InputError(what + ": truncated file");
  if (std::memcmp(bytes, magic, 4) != 0) throw InputError(what + ": bad magic");
}

} // namespace simplicits::binary
