#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "edsh/model.hpp"

namespace edsh {

// Binary codes packed 64 bits per word, one contiguous word run per code.
// Bit j of code i is set iff the +-1 code matrix had +1 at (j, i). Bits at
// positions >= k stay zero.
struct PackedCodes {
  std::size_t n = 0;  // number of codes
  std::size_t k = 0;  // bits per code
  std::vector<std::uint64_t> words;

  std::size_t words_per_code() const { return (k + 63) / 64; }

  std::span<const std::uint64_t> code(std::size_t i) const {
    const std::size_t wpc = words_per_code();
    return {words.data() + i * wpc, wpc};
  }
};

// Packs a k x n matrix of exact +-1 entries, column i becoming code i.
inline PackedCodes pack(const DenseMatrix& b) {
  PackedCodes out;
  out.k = b.rows;
  out.n = b.cols;
  out.words.assign(out.n * out.words_per_code(), 0);
  const std::size_t wpc = out.words_per_code();
  for (std::size_t i = 0; i < out.n; ++i)
    for (std::size_t j = 0; j < out.k; ++j) {
      const double v = b(j, i);
      if (v == 1.0)
        out.words[i * wpc + j / 64] |= std::uint64_t{1} << (j % 64);
      else if (v != -1.0)
        throw EncodingError("pack: entry is not +1/-1", j, i);
    }
  return out;
}

inline DenseMatrix unpack(const PackedCodes& codes) {
  DenseMatrix b(codes.k, codes.n);
  const std::size_t wpc = codes.words_per_code();
  for (std::size_t i = 0; i < codes.n; ++i)
    for (std::size_t j = 0; j < codes.k; ++j) {
      const bool set = codes.words[i * wpc + j / 64] >> (j % 64) & 1u;
      b(j, i) = set ? 1.0 : -1.0;
    }
  return b;
}

namespace detail {

inline std::size_t hamming_words(std::span<const std::uint64_t> a,
                                 std::span<const std::uint64_t> b) {
  std::size_t d = 0;
  for (std::size_t w = 0; w < a.size(); ++w)
    d += std::size_t(std::popcount(a[w] ^ b[w]));
  return d;
}

}  // namespace detail

inline std::size_t hamming(const PackedCodes& codes, std::size_t i, std::size_t j) {
  if (i >= codes.n || j >= codes.n)
    throw ArgumentError("hamming: code index out of range");
  return detail::hamming_words(codes.code(i), codes.code(j));
}

// Hashes raw feature columns: center with the stored training means, apply
// the modality's linear map, optionally rotate, then take signs (with
// sign(0) = +1, matching training).
inline PackedCodes encode(const EdshModel& m, const DenseMatrix& x, int modality,
                          bool use_rotation = true) {
  if (modality != 1 && modality != 2)
    throw ArgumentError("encode: modality must be 1 or 2, got " + std::to_string(modality));
  const DenseMatrix& w = modality == 1 ? m.w1 : m.w2;
  const std::vector<double>& mean = modality == 1 ? m.centering.mean1 : m.centering.mean2;
  if (x.rows != w.cols)
    throw ShapeError("encode: input has " + std::to_string(x.rows) +
                     " features, hash map expects " + std::to_string(w.cols));
  DenseMatrix z = matmul(w, apply_center(x, mean));
  if (use_rotation) z = matmul(m.r, z);
  for (double& v : z.values) v = v >= 0.0 ? 1.0 : -1.0;
  return pack(z);
}

// Ranks database codes by Hamming distance from the single query code,
// ascending, ties broken by ascending database index. Returns at most
// top_m (index, distance) pairs.
inline std::vector<std::pair<std::size_t, std::size_t>> rank(const PackedCodes& query,
                                                             const PackedCodes& db,
                                                             std::size_t top_m) {
  if (query.k != db.k)
    throw ShapeError("rank: code lengths differ (" + std::to_string(query.k) + " vs " +
                     std::to_string(db.k) + ")");
  if (query.n != 1) throw ArgumentError("rank: query must hold exactly one code");
  if (top_m < 1) throw ArgumentError("rank: top_m must be at least 1");

  const auto q = query.code(0);
  std::vector<std::pair<std::size_t, std::size_t>> hits(db.n);  // (distance, index)
  for (std::size_t i = 0; i < db.n; ++i)
    hits[i] = {detail::hamming_words(q, db.code(i)), i};
  std::sort(hits.begin(), hits.end());
  hits.resize(std::min(top_m, db.n));
  for (auto& h : hits) std::swap(h.first, h.second);
  return hits;
}

inline PackedCodes single_code(const PackedCodes& codes, std::size_t i) {
  if (i >= codes.n) throw ArgumentError("single_code: index out of range");
  const std::size_t wpc = codes.words_per_code();
  PackedCodes one;
  one.n = 1;
  one.k = codes.k;
  one.words.assign(codes.words.begin() + i * wpc, codes.words.begin() + (i + 1) * wpc);
  return one;
}

// ---- packed code I/O ----------------------------------------------------
//
// Same envelope as matrix files: magic, u32 code count, u32 bits per code,
// then n * ceil(k/64) u64 words little-endian.

inline constexpr char kCodesMagic[8] = {'E', 'D', 'S', 'H', 'B', 'I', 'N', '1'};

inline void save_codes(const std::filesystem::path& path, const PackedCodes& codes) {
  std::vector<unsigned char> buf;
  buf.reserve(detail::kHeaderBytes + 8 * codes.words.size());
  buf.insert(buf.end(), kCodesMagic, kCodesMagic + 8);
  detail::append_raw(buf, static_cast<std::uint32_t>(codes.n));
  detail::append_raw(buf, static_cast<std::uint32_t>(codes.k));
  for (std::uint64_t w : codes.words) detail::append_raw(buf, w);
  detail::write_file(path, buf);
}

inline PackedCodes load_codes(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  if (bytes.size() < detail::kHeaderBytes)
    throw FormatError("truncated header in " + path.string(), bytes.size());
  if (std::memcmp(bytes.data(), kCodesMagic, 8) != 0)
    throw FormatError("bad magic in " + path.string(), 0);
  PackedCodes codes;
  codes.n = detail::load_u32(bytes.data() + 8);
  codes.k = detail::load_u32(bytes.data() + 12);
  const std::uint64_t n_words = std::uint64_t(codes.n) * codes.words_per_code();
  const std::uint64_t expected = detail::kHeaderBytes + 8 * n_words;
  if (bytes.size() < expected)
    throw FormatError("truncated payload in " + path.string(), bytes.size());
  if (bytes.size() > expected)
    throw FormatError("trailing bytes in " + path.string(), expected);
  codes.words.resize(n_words);
  std::memcpy(codes.words.data(), bytes.data() + detail::kHeaderBytes, 8 * n_words);

  // bits beyond k must be zero or distances would silently drift
  const std::size_t tail = codes.k % 64;
  if (tail != 0) {
    const std::uint64_t mask = ~((std::uint64_t{1} << tail) - 1);
    const std::size_t wpc = codes.words_per_code();
    for (std::size_t i = 0; i < codes.n; ++i)
      if (codes.words[i * wpc + wpc - 1] & mask)
        throw FormatError("padding bits set in " + path.string(),
                          detail::kHeaderBytes + 8 * (i * wpc + wpc - 1));
  }
  return codes;
}

}  // namespace edsh
