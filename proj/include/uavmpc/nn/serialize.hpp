#pragma once

// Binary parameter files:
//   magic "UAVMPCP\0" | u32 version | u32 tensor count |
//   per tensor: u32 name length, name bytes, i64 rows, i64 cols, rows*cols f64 (column-major)
// Native byte order.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "uavmpc/nn/params.hpp"

namespace uavmpc::nn {

inline constexpr char kParamMagic[8] = {'U', 'A', 'V', 'M', 'P', 'C', 'P', '\0'};
inline constexpr std::uint32_t kParamFormatVersion = 1;

namespace detail {
template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw StructuralError("truncated parameter file");
  return v;
}
}  // namespace detail

inline void write_params(std::ostream& os, const ParamVector& p) {
  os.write(kParamMagic, sizeof(kParamMagic));
  detail::put(os, kParamFormatVersion);
  detail::put(os, static_cast<std::uint32_t>(p.size()));
  for (const auto& t : p.tensors()) {
    detail::put(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put(os, static_cast<std::int64_t>(t.value.rows()));
    detail::put(os, static_cast<std::int64_t>(t.value.cols()));
    os.write(reinterpret_cast<const char*>(t.value.data()),
             static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  }
}

inline ParamVector read_params(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kParamMagic, sizeof(magic)) != 0) throw StructuralError("not a parameter file");
  const auto version = detail::get<std::uint32_t>(is);
  if (version != kParamFormatVersion) throw StructuralError("unsupported parameter file version");
  const auto count = detail::get<std::uint32_t>(is);
  ParamVector p;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = detail::get<std::uint32_t>(is);
    if (len > 4096) throw StructuralError("corrupt tensor name");
    std::string name(len, '\0');
    is.read(name.data(), len);
    const auto rows = detail::get<std::int64_t>(is);
    const auto cols = detail::get<std::int64_t>(is);
    if (rows < 0 || cols < 0 || rows * cols > (std::int64_t{1} << 32)) throw StructuralError("corrupt tensor shape");
    const std::size_t idx = p.add(name, rows, cols);
    is.read(reinterpret_cast<char*>(p[idx].data()), static_cast<std::streamsize>(rows * cols * sizeof(double)));
    if (!is) throw StructuralError("truncated parameter file");
  }
  return p;
}

inline void save_params(const std::string& path, const ParamVector& p) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw StructuralError("cannot open " + path + " for writing");
  write_params(os, p);
  if (!os) throw StructuralError("write failed: " + path);
}

/// Loads `path` into `into`, which fixes the expected names and shapes.
inline ParamVector load_params(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StructuralError("cannot open " + path);
  return read_params(is);
}

inline void load_params(const std::string& path, ParamVector& into) {
  ParamVector loaded = load_params(path);
  if (!loaded.same_shape(into)) throw StructuralError("parameter file " + path + " does not match network spec");
  into.assign(loaded);
}

}  // namespace uavmpc::nn
