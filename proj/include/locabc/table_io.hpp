#pragma once

// Simulation-table persistence.
//
// CSV (interchange):
//   # locabc-table v1
//   # model=<id>
//   # seed=<uint64>
//   # prior=<lo>:<hi>;<lo>:<hi>;...
//   # param_names=<name>,...
//   # summary_names=<name>,...
//   theta_1,...,theta_d,s_1,...,s_q
//   <N data rows>
// Metadata lines are optional on load. Values are written in shortest
// round-trip form, so a save/load cycle is bit-exact.
//
// Binary cache: see docs/formats.md ("LFIT1").

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "locabc/core.hpp"

namespace locabc {

namespace detail {

inline std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline bool parse_double(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
    text.remove_prefix(1);
  }
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') {
    text.remove_prefix(1);
  }
  if (text.empty()) {
    return false;
  }
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
  return res.ec == std::errc() && res.ptr == text.data() + text.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

inline std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline std::ofstream open_for_write(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  return out;
}

inline std::ifstream open_for_read(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  return in;
}

// Little-endian primitives for the binary cache.
inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw FormatError("binary table: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

inline void put_string(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in) {
  const std::uint64_t n = get_u64(in);
  if (n > (1ULL << 32)) throw FormatError("binary table: implausible string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("binary table: truncated string");
  return s;
}

inline std::vector<std::string> default_names(const std::string& prefix, std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 1; i <= n; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

}  // namespace detail

inline constexpr std::string_view kBinaryMagic = "LFIT1";

/// Writes `table` as CSV.
inline void save_table_csv(const SimulationTable& table, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  const TableMeta& meta = table.meta();
  out << "# locabc-table v1\n";
  out << "# model=" << meta.model << '\n';
  out << "# seed=" << meta.seed << '\n';
  out << "# prior=";
  for (std::size_t j = 0; j < meta.prior.size(); ++j) {
    if (j) out << ';';
    out << detail::format_double(meta.prior[j][0]) << ':' << detail::format_double(meta.prior[j][1]);
  }
  out << '\n';
  out << "# param_names=" << detail::join(meta.param_names, ',') << '\n';
  out << "# summary_names=" << detail::join(meta.summary_names, ',') << '\n';

  const std::size_t d = table.param_dim();
  const std::size_t q = table.summary_dim();
  std::string line;
  for (std::size_t j = 1; j <= d; ++j) line += (j > 1 ? ",theta_" : "theta_") + std::to_string(j);
  for (std::size_t j = 1; j <= q; ++j) line += ",s_" + std::to_string(j);
  out << line << '\n';

  for (std::size_t i = 0; i < table.n_sims(); ++i) {
    line.clear();
    const auto p = table.param_row(i);
    const auto s = table.summary_row(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (j) line += ',';
      line += detail::format_double(p[j]);
    }
    for (std::size_t j = 0; j < q; ++j) {
      line += ',';
      line += detail::format_double(s[j]);
    }
    out << line << '\n';
  }
  if (!out) {
    throw IoError("write failed for '" + path.string() + "'");
  }
}

/// Reads a CSV table written by save_table_csv (or any file with the same header contract).
inline SimulationTable load_table_csv(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  TableMeta meta;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::size_t d = 0;
  std::size_t q = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string_view body = std::string_view(line).substr(1);
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      std::string_view key = body.substr(0, eq);
      while (!key.empty() && key.front() == ' ') key.remove_prefix(1);
      const std::string value(body.substr(eq + 1));
      if (key == "model") {
        meta.model = value;
      } else if (key == "seed") {
        try {
          meta.seed = std::stoull(value);
        } catch (const std::exception&) {
          throw ParseError("bad seed '" + value + "'", line_no, 1);
        }
      } else if (key == "prior" && !value.empty()) {
        for (const auto part : detail::split(value, ';')) {
          const auto bounds = detail::split(part, ':');
          std::array<double, 2> range{};
          if (bounds.size() != 2 || !detail::parse_double(bounds[0], range[0]) ||
              !detail::parse_double(bounds[1], range[1])) {
            throw ParseError("bad prior range '" + std::string(part) + "'", line_no, 1);
          }
          meta.prior.push_back(range);
        }
      } else if (key == "param_names" && !value.empty()) {
        for (const auto n : detail::split(value, ',')) meta.param_names.emplace_back(n);
      } else if (key == "summary_names" && !value.empty()) {
        for (const auto n : detail::split(value, ',')) meta.summary_names.emplace_back(n);
      }
      continue;
    }
    have_header = true;
    const auto cells = detail::split(line, ',');
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string_view cell = cells[c];
      if (cell.starts_with("theta_")) {
        if (q != 0) throw ParseError("theta column after summary columns", line_no, c + 1);
        if (cell != "theta_" + std::to_string(d + 1)) throw ParseError("unexpected header '" + std::string(cell) + "'", line_no, c + 1);
        ++d;
      } else if (cell.starts_with("s_")) {
        if (cell != "s_" + std::to_string(q + 1)) throw ParseError("unexpected header '" + std::string(cell) + "'", line_no, c + 1);
        ++q;
      } else {
        throw ParseError("unexpected header '" + std::string(cell) + "'", line_no, c + 1);
      }
    }
    break;
  }
  if (!have_header) {
    throw FormatError("'" + path.string() + "' contains no table header");
  }
  if (d == 0 || q == 0) {
    throw FormatError("'" + path.string() + "' header needs theta_ and s_ columns");
  }

  std::vector<double> values;
  std::size_t n = 0;
  const std::size_t width = d + q;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " cells, found " + std::to_string(cells.size()),
                       line_no, std::min(cells.size(), width) + 1);
    }
    for (std::size_t c = 0; c < width; ++c) {
      double v = 0.0;
      if (!detail::parse_double(cells[c], v)) {
        throw ParseError("cannot parse '" + std::string(cells[c]) + "' as a number", line_no, c + 1);
      }
      values.push_back(v);
    }
    ++n;
  }
  if (n == 0) {
    throw FormatError("'" + path.string() + "' has a header but no rows");
  }
  const Eigen::Map<const Matrix> all(values.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
  Matrix params = all.leftCols(static_cast<Eigen::Index>(d));
  Matrix summaries = all.rightCols(static_cast<Eigen::Index>(q));
  return SimulationTable(std::move(params), std::move(summaries), std::move(meta));
}

inline void save_table_binary(const SimulationTable& table, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path, std::ios::out | std::ios::binary);
  const TableMeta& meta = table.meta();
  out.write(kBinaryMagic.data(), static_cast<std::streamsize>(kBinaryMagic.size()));
  detail::put_u64(out, table.n_sims());
  detail::put_u64(out, table.param_dim());
  detail::put_u64(out, table.summary_dim());
  detail::put_u64(out, meta.seed);
  detail::put_string(out, meta.model);
  detail::put_u64(out, meta.prior.size());
  for (const auto& r : meta.prior) {
    detail::put_f64(out, r[0]);
    detail::put_f64(out, r[1]);
  }
  detail::put_u64(out, meta.param_names.size());
  for (const auto& s : meta.param_names) detail::put_string(out, s);
  detail::put_u64(out, meta.summary_names.size());
  for (const auto& s : meta.summary_names) detail::put_string(out, s);
  const Matrix& p = table.params();
  const Matrix& s = table.summaries();
  for (Eigen::Index i = 0; i < p.size(); ++i) detail::put_f64(out, p.data()[i]);
  for (Eigen::Index i = 0; i < s.size(); ++i) detail::put_f64(out, s.data()[i]);
  if (!out) {
    throw IoError("write failed for '" + path.string() + "'");
  }
}

inline SimulationTable load_table_binary(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path, std::ios::in | std::ios::binary);
  std::array<char, 5> magic{};
  in.read(magic.data(), 5);
  if (!in) {
    throw FormatError("'" + path.string() + "' is empty or truncated");
  }
  if (std::string_view(magic.data(), 5) != kBinaryMagic) {
    throw FormatError("'" + path.string() + "' is not an LFIT1 table");
  }
  const std::uint64_t n = detail::get_u64(in);
  const std::uint64_t d = detail::get_u64(in);
  const std::uint64_t q = detail::get_u64(in);
  if (n == 0 || d == 0 || q == 0) {
    throw FormatError("binary table: zero dimension");
  }
  TableMeta meta;
  meta.seed = detail::get_u64(in);
  meta.model = detail::get_string(in);
  const std::uint64_t n_prior = detail::get_u64(in);
  if (n_prior > d + 1024) throw FormatError("binary table: implausible prior length");
  for (std::uint64_t j = 0; j < n_prior; ++j) {
    const double lo = detail::get_f64(in);
    const double hi = detail::get_f64(in);
    meta.prior.push_back({lo, hi});
  }
  const std::uint64_t n_pn = detail::get_u64(in);
  if (n_pn != 0 && n_pn != d) throw FormatError("binary table: parameter-name count mismatch");
  for (std::uint64_t j = 0; j < n_pn; ++j) meta.param_names.push_back(detail::get_string(in));
  const std::uint64_t n_sn = detail::get_u64(in);
  if (n_sn != 0 && n_sn != q) throw FormatError("binary table: summary-name count mismatch");
  for (std::uint64_t j = 0; j < n_sn; ++j) meta.summary_names.push_back(detail::get_string(in));

  Matrix params(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Matrix summaries(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
  for (Eigen::Index i = 0; i < params.size(); ++i) params.data()[i] = detail::get_f64(in);
  for (Eigen::Index i = 0; i < summaries.size(); ++i) summaries.data()[i] = detail::get_f64(in);
  in.peek();
  if (!in.eof()) {
    throw FormatError("binary table: trailing bytes after payload");
  }
  return SimulationTable(std::move(params), std::move(summaries), std::move(meta));
}

/// Writes the summary column-order manifest (one name per line) next to a saved table.
inline std::filesystem::path write_column_manifest(const SimulationTable& table, const std::filesystem::path& table_path) {
  std::filesystem::path manifest = table_path;
  manifest += ".columns.txt";
  auto out = detail::open_for_write(manifest);
  const auto names = table.meta().summary_names.empty() ? detail::default_names("s_", table.summary_dim())
                                                        : table.meta().summary_names;
  for (std::size_t j = 0; j < names.size(); ++j) {
    out << "s_" << (j + 1) << ' ' << names[j] << '\n';
  }
  return manifest;
}

/// Format chosen by extension: `.bin` / `.lfit` → binary cache, anything else → CSV.
inline bool is_binary_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return ext == ".bin" || ext == ".lfit";
}

inline void save_table(const SimulationTable& table, const std::filesystem::path& path) {
  if (is_binary_path(path)) {
    save_table_binary(table, path);
  } else {
    save_table_csv(table, path);
  }
  write_column_manifest(table, path);
}

inline SimulationTable load_table(const std::filesystem::path& path) {
  return is_binary_path(path) ? load_table_binary(path) : load_table_csv(path);
}

}  // namespace locabc
