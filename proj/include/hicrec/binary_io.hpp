#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "hicrec/errors.hpp"
#include "hicrec/sparse.hpp"

namespace hicrec::io {

// Little-endian primitives shared by checkpoints and the dataset cache.

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(bytes, 8);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFFu);
  out.write(bytes, 4);
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& in, char* dst, std::size_t n) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw DataError("unexpected end of binary stream");
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  read_exact(in, reinterpret_cast<char*>(bytes), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  read_exact(in, reinterpret_cast<char*>(bytes), 4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

inline std::string read_string(std::istream& in, std::size_t max_len = 1u << 20) {
  const std::uint32_t n = read_u32(in);
  if (n > max_len) throw DataError("string length " + std::to_string(n) + " exceeds limit");
  std::string s(n, '\0');
  read_exact(in, s.data(), n);
  return s;
}

inline void write_sizes(std::ostream& out, const std::vector<std::size_t>& v) {
  write_u64(out, v.size());
  for (std::size_t x : v) write_u64(out, x);
}

inline std::vector<std::size_t> read_sizes(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  std::vector<std::size_t> v;
  v.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 24)));
  for (std::uint64_t i = 0; i < n; ++i) v.push_back(static_cast<std::size_t>(read_u64(in)));
  return v;
}

inline void write_csr(std::ostream& out, const SparseMatrix& m) {
  write_u64(out, m.rows());
  write_u64(out, m.cols());
  write_sizes(out, m.row_ptr());
  write_sizes(out, m.col_idx());
  write_u64(out, m.nnz());
  for (double v : m.values()) write_f64(out, v);
}

inline SparseMatrix read_csr(std::istream& in) {
  const auto rows = static_cast<std::size_t>(read_u64(in));
  const auto cols = static_cast<std::size_t>(read_u64(in));
  auto row_ptr = read_sizes(in);
  auto col_idx = read_sizes(in);
  const std::uint64_t n = read_u64(in);
  std::vector<double> values;
  values.reserve(col_idx.size());
  for (std::uint64_t i = 0; i < n; ++i) values.push_back(read_f64(in));
  try {
    return SparseMatrix::from_parts(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
  } catch (const ShapeError& e) {
    throw DataError(std::string("corrupt sparse matrix: ") + e.what());
  }
}

}  // namespace hicrec::io
