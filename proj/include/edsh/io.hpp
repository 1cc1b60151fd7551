#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "edsh/matrix.hpp"

namespace edsh {

static_assert(std::endian::native == std::endian::little,
              "matrix and code files are little-endian and use raw stores");

namespace detail {

constexpr std::size_t kHeaderBytes = 16;  // magic + two u32 dims

inline std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path,
                       const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed on " + path.string());
}

inline std::uint32_t load_u32(const unsigned char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

template <class T>
inline void append_raw(std::vector<unsigned char>& buf, const T& v) {
  const auto* p = reinterpret_cast<const unsigned char*>(&v);
  buf.insert(buf.end(), p, p + sizeof v);
}

}  // namespace detail

inline constexpr char kMatrixMagic[8] = {'E', 'D', 'S', 'H', 'M', 'A', 'T', '1'};

// Writes magic, u32 rows, u32 cols, then rows*cols doubles row-major.
// Non-finite entries are refused so every written file loads back clean.
inline void save_matrix(const std::filesystem::path& path, const DenseMatrix& m) {
  for (std::size_t i = 0; i < m.values.size(); ++i)
    if (!std::isfinite(m.values[i]))
      throw FormatError("save_matrix: non-finite value in " + path.string(),
                        detail::kHeaderBytes + 8 * i);
  std::vector<unsigned char> buf;
  buf.reserve(detail::kHeaderBytes + 8 * m.values.size());
  buf.insert(buf.end(), kMatrixMagic, kMatrixMagic + 8);
  detail::append_raw(buf, static_cast<std::uint32_t>(m.rows));
  detail::append_raw(buf, static_cast<std::uint32_t>(m.cols));
  for (double v : m.values) detail::append_raw(buf, v);
  detail::write_file(path, buf);
}

inline DenseMatrix load_matrix(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < detail::kHeaderBytes)
    throw FormatError("truncated header in " + path.string(), bytes.size());
  if (std::memcmp(bytes.data(), kMatrixMagic, 8) != 0)
    throw FormatError("bad magic in " + path.string(), 0);
  const std::uint64_t rows = detail::load_u32(bytes.data() + 8);
  const std::uint64_t cols = detail::load_u32(bytes.data() + 12);
  const std::uint64_t expected = detail::kHeaderBytes + 8 * rows * cols;
  if (bytes.size() < expected)
    throw FormatError("truncated payload in " + path.string(), bytes.size());
  if (bytes.size() > expected)
    throw FormatError("trailing bytes in " + path.string(), expected);
  DenseMatrix m(rows, cols);
  std::memcpy(m.values.data(), bytes.data() + detail::kHeaderBytes, 8 * rows * cols);
  for (std::size_t i = 0; i < m.values.size(); ++i)
    if (!std::isfinite(m.values[i]))
      throw FormatError("non-finite value in " + path.string(),
                        detail::kHeaderBytes + 8 * i);
  return m;
}

}  // namespace edsh
