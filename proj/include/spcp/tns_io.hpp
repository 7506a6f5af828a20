#pragma once

#include <array>
#include <charconv>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "spcp/sptensor.hpp"

// FROSTT .tns text format: one nonzero per line, d 1-based indices followed by
// the value. Lines starting with '#' are comments. A comment of the form
// "# dims: I1 I2 ... Id" fixes the mode lengths; otherwise they are the
// per-mode maxima of the indices read.

namespace spcp {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, std::size_t line_no) {
  T v{};
  const char* first = tok.data();
  if constexpr (std::is_floating_point_v<T>) {
    if (!tok.empty() && tok.front() == '+') ++first;
  }
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace detail

inline SparseTensor read_tns(std::istream& in) {
  std::vector<ordinal_t> header_dims;
  std::vector<ordinal_t> coords;
  std::vector<real_t> values;
  std::size_t d = 0;
  std::size_t line_no = 0;
  std::string line;

  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = detail::split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.front().front() == '#') {
      std::string_view first = tokens.front();
      std::size_t k = 1;
      if (first == "#" && tokens.size() > 1 && tokens[1] == "dims:") {
        k = 2;
      } else if (first != "#dims:") {
        continue;
      }
      header_dims.clear();
      for (; k < tokens.size(); ++k) header_dims.push_back(detail::parse_number<ordinal_t>(tokens[k], line_no));
      continue;
    }

    if (d == 0) {
      if (tokens.size() < 2) throw ParseError("line " + std::to_string(line_no) + ": expected indices and a value");
      d = tokens.size() - 1;
    } else if (tokens.size() != d + 1) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(d + 1) + " columns, found " +
                       std::to_string(tokens.size()));
    }
    for (std::size_t m = 0; m < d; ++m) {
      const auto idx = detail::parse_number<ordinal_t>(tokens[m], line_no);
      if (idx == 0) throw ParseError("line " + std::to_string(line_no) + ": indices are 1-based, found 0");
      coords.push_back(idx - 1);
    }
    values.push_back(detail::parse_number<real_t>(tokens[d], line_no));
  }
  if (in.bad()) throw Error("read_tns: stream read failure");

  if (d == 0) {
    if (header_dims.empty()) throw ParseError("read_tns: no nonzeros found");
    return from_coo(header_dims, {}, {});
  }

  std::vector<ordinal_t> dims;
  if (!header_dims.empty()) {
    if (header_dims.size() != d) {
      throw ParseError("read_tns: dims header lists " + std::to_string(header_dims.size()) + " modes, data has " +
                       std::to_string(d));
    }
    dims = header_dims;
  } else {
    dims.assign(d, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t m = 0; m < d; ++m) dims[m] = std::max(dims[m], coords[i * d + m] + 1);
    }
  }
  return from_coo(std::move(dims), std::move(coords), std::move(values), DuplicatePolicy::merge_sum);
}

/// Writes X with a "# dims:" header and shortest round-trip value formatting.
inline void write_tns(const SparseTensor& X, std::ostream& out) {
  out << "# dims:";
  for (auto n : X.dims()) out << ' ' << n;
  out << '\n';

  std::array<char, 64> buf{};
  const std::size_t d = X.ndims();
  for (std::size_t i = 0; i < X.nnz(); ++i) {
    for (std::size_t m = 0; m < d; ++m) out << X.subscript(i, m) + 1 << ' ';
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), X.value(i));
    out.write(buf.data(), ptr - buf.data());
    out << '\n';
  }
  if (!out) throw Error("write_tns: stream write failure");
}

}  // namespace spcp
