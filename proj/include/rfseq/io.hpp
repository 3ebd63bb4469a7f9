#pragma once

// Little-endian byte helpers and whole-file I/O shared by the pcap, IQ,
// dataset and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "rfseq/error.hpp"

namespace rfseq::io {

using Bytes = std::vector<std::uint8_t>;

template <typename T>
T byteswap_if(T v, bool swap) {
  static_assert(std::is_trivially_copyable_v<T>);
  if (!swap) return v;
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  std::memcpy(&v, b, sizeof(T));
  return v;
}

/// Reads a T stored with the given endianness at `offset`. Caller checks bounds.
template <typename T>
T load(std::span<const std::uint8_t> buf, std::size_t offset, std::endian order = std::endian::little) {
  T v;
  std::memcpy(&v, buf.data() + offset, sizeof(T));
  return byteswap_if(v, order != std::endian::native);
}

template <typename T>
void append(Bytes& out, T v, std::endian order = std::endian::little) {
  v = byteswap_if(v, order != std::endian::native);
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

inline Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::Io, "cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  Bytes data(size);
  if (size) in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(size));
  require(static_cast<bool>(in) || size == 0, Errc::Io, "short read on " + path.string());
  return data;
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  require(static_cast<bool>(out), Errc::Io, "write failed on " + path.string());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

inline std::string read_text(const std::filesystem::path& path) {
  const Bytes b = read_file(path);
  return {b.begin(), b.end()};
}

/// 64-bit FNV-1a; stable across platforms, used for config/cell hashes.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
  return s;
}

}  // namespace rfseq::io
