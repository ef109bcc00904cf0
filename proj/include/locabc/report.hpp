#pragma once

// CSV outputs of an experiment. Every header is frozen; see docs/formats.md.
//
// Missing values are empty fields. Reals use shortest round-trip formatting,
// so report files are byte-identical across runs with the same config.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "locabc/experiment.hpp"
#include "locabc/table_io.hpp"

namespace locabc {

/// Type-7 sample quantile (linear interpolation between order statistics).
inline double sample_quantile(std::vector<double> v, double p) {
  if (v.empty()) throw ArgumentError("quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("quantile probability must lie in [0, 1]");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double sample_median(std::vector<double> v) { return sample_quantile(std::move(v), 0.5); }

inline double sample_mean(const std::vector<double>& v) {
  if (v.empty()) throw ArgumentError("mean of an empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

namespace detail {

inline std::string opt_real(double v) { return std::isfinite(v) ? format_double(v) : std::string(); }
inline std::string opt_count(std::size_t v) { return v ? std::to_string(v) : std::string(); }

/// Quotes a field when it contains a separator, quote or newline.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' || ch == '\r' ? ' ' : ch;
  }
  return out + "\"";
}

/// Splits one CSV record, honouring double-quoted fields.
inline std::vector<std::string> csv_record(const std::string& line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        out.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.emplace_back();
    } else {
      out.back() += ch;
    }
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  auto out = open_for_write(path, std::ios::out | std::ios::binary);
  out << text;
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// report.csv

inline std::vector<std::string> report_header(const std::vector<std::string>& param_names) {
  std::vector<std::string> h = {"test_id", "method", "n_sims", "n_summaries", "status", "srmse"};
  for (const auto& p : param_names) h.push_back("rmse_" + p);
  for (const char* s : {"alpha", "initial_components", "local_components", "warning", "error"}) h.emplace_back(s);
  return h;
}

inline std::string report_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << detail::join(report_header(r.param_names), ',') << '\n';
  for (const auto& row : r.rows) {
    out << row.test_id << ',' << to_string(row.method) << ',' << row.n_sims << ',' << row.n_summaries << ','
        << (row.ok ? "ok" : "failed") << ',' << detail::opt_real(row.srmse);
    for (std::size_t j = 0; j < r.param_names.size(); ++j) {
      out << ',' << (j < row.rmse.size() ? detail::opt_real(row.rmse[j]) : std::string());
    }
    out << ',' << detail::opt_real(row.alpha) << ',' << detail::opt_count(row.initial_components) << ','
        << detail::opt_count(row.local_components) << ',' << (row.warning ? 1 : 0) << ','
        << detail::csv_field(row.error) << '\n';
  }
  return out.str();
}

/// Parses report.csv back into rows. Wall times and diagnostics are not part of the file.
inline ExperimentReport parse_report_csv(const std::string& text, const std::string& origin = "report") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(origin + ": empty report");
  const auto header = detail::csv_record(line);
  constexpr std::size_t kFixed = 11;
  if (header.size() < kFixed || header[0] != "test_id") throw FormatError(origin + ": not a report file");
  ExperimentReport r;
  for (std::size_t j = 6; j + 5 < header.size(); ++j) {
    if (header[j].rfind("rmse_", 0) != 0) throw FormatError(origin + ": unexpected column " + header[j]);
    r.param_names.push_back(header[j].substr(5));
  }
  if (report_header(r.param_names) != header) throw FormatError(origin + ": header does not match the report schema");

  const auto real = [&](const std::string& s, std::size_t line_no, std::size_t col) {
    if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
    double v = 0.0;
    if (!detail::parse_double(s, v)) throw ParseError(origin + ": bad number '" + s + "'", line_no, col + 1);
    return v;
  };
  const auto count = [&](const std::string& s, std::size_t line_no, std::size_t col) -> std::size_t {
    if (s.empty()) return 0;
    const double v = real(s, line_no, col);
    if (!(v >= 0.0) || v != std::floor(v)) throw ParseError(origin + ": bad count '" + s + "'", line_no, col + 1);
    return static_cast<std::size_t>(v);
  };

  const std::size_t d = r.param_names.size();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = detail::csv_record(line);
    if (f.size() != header.size()) {
      throw ParseError(origin + ": expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(f.size()),
                       line_no, std::min(f.size(), header.size()) + 1);
    }
    ReportRow row;
    row.test_id = count(f[0], line_no, 0);
    try {
      row.method = parse_method(f[1]);
    } catch (const ArgumentError& e) {
      throw ParseError(origin + ": " + e.what(), line_no, 2);
    }
    row.n_sims = count(f[2], line_no, 2);
    row.n_summaries = count(f[3], line_no, 3);
    row.ok = f[4] == "ok";
    row.srmse = real(f[5], line_no, 5);
    for (std::size_t j = 0; j < d; ++j) row.rmse.push_back(real(f[6 + j], line_no, 6 + j));
    row.alpha = real(f[6 + d], line_no, 6 + d);
    row.initial_components = count(f[7 + d], line_no, 7 + d);
    row.local_components = count(f[8 + d], line_no, 8 + d);
    row.warning = f[9 + d] == "1";
    row.error = f[10 + d];
    r.rows.push_back(std::move(row));
  }
  return r;
}

inline ExperimentReport read_report_csv(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_report_csv(buf.str(), path.string());
}

// ---------------------------------------------------------------------------
// summary.csv, timing.csv, diagnostics.csv

/// Per method: number of tests, failures, and mean / median / 5 % / 95 % SRMSE over successful tests.
inline std::string summary_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "method,n_tests,n_failed,mean_srmse,median_srmse,q05_srmse,q95_srmse\n";
  for (MethodId m : all_methods()) {
    std::vector<double> v;
    std::size_t total = 0;
    for (const auto& row : r.rows) {
      if (row.method != m) continue;
      ++total;
      if (row.ok) v.push_back(row.srmse);
    }
    if (total == 0) continue;
    out << to_string(m) << ',' << total << ',' << total - v.size();
    if (v.empty()) {
      out << ",,,,\n";
      continue;
    }
    out << ',' << detail::format_double(sample_mean(v)) << ',' << detail::format_double(sample_median(v)) << ','
        << detail::format_double(sample_quantile(v, 0.05)) << ',' << detail::format_double(sample_quantile(v, 0.95))
        << '\n';
  }
  return out.str();
}

inline std::string timing_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "scope,test_id,method,seconds\n";
  for (const auto& g : r.global_fits) out << "global_fit,," << g.name << ',' << detail::format_double(g.seconds) << '\n';
  for (const auto& row : r.rows) {
    out << "test," << row.test_id << ',' << to_string(row.method) << ',' << detail::format_double(row.seconds)
        << '\n';
  }
  return out.str();
}

inline std::string diagnostics_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "test_id,method,grid_index,alpha,initial_components,local_components,feasible,chosen,srmse_total\n";
  for (const auto& d : r.diagnostics) {
    const bool pls = d.params.method == Method::pls;
    out << d.test_id << ',' << to_string(d.method) << ',' << d.grid_index << ','
        << detail::format_double(d.params.alpha) << ',' << (pls ? std::to_string(d.params.initial_components) : "")
        << ',' << (pls ? std::to_string(d.params.local_components) : "") << ',' << (d.feasible ? 1 : 0) << ','
        << (d.chosen ? 1 : 0) << ',' << detail::opt_real(d.srmse_total) << '\n';
  }
  return out.str();
}

/// Writes report.csv, summary.csv, diagnostics.csv and timing.csv into `dir`.
inline void write_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  detail::write_file(dir / "report.csv", report_csv(r));
  detail::write_file(dir / "summary.csv", summary_csv(r));
  detail::write_file(dir / "diagnostics.csv", diagnostics_csv(r));
  detail::write_file(dir / "timing.csv", timing_csv(r));
}

// ---------------------------------------------------------------------------
// Plot data

/// (local, global) pairs compared in relative_srmse.csv.
inline const std::vector<std::pair<MethodId, MethodId>>& relative_pairs() {
  static const std::vector<std::pair<MethodId, MethodId>> pairs = {
      {MethodId::localReg, MethodId::Reg}, {MethodId::localRegopt, MethodId::Reg}, {MethodId::PLSopt, MethodId::PLS},
      {MethodId::localPLS, MethodId::PLS}, {MethodId::localPLSopt, MethodId::PLS}};
  return pairs;
}

/// SRMSE(local) / SRMSE(global) per test dataset, for tests where both succeeded.
/// Key: (n_sims, n_summaries). Tests are matched on test_id within a key.
inline std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> srmse_ratios(const ExperimentReport& r,
                                                                                      MethodId local,
                                                                                      MethodId global) {
  using Key = std::tuple<std::size_t, std::size_t, std::size_t>;
  std::map<Key, double> g;
  for (const auto& row : r.rows) {
    if (row.method == global && row.ok) g[{row.n_sims, row.n_summaries, row.test_id}] = row.srmse;
  }
  std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> out;
  for (const auto& row : r.rows) {
    if (row.method != local || !row.ok) continue;
    const auto it = g.find({row.n_sims, row.n_summaries, row.test_id});
    if (it == g.end() || !(it->second > 0.0)) continue;
    out[{row.n_sims, row.n_summaries}].push_back(row.srmse / it->second);
  }
  return out;
}

inline std::string srmse_by_method_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "n_sims,n_summaries,method,test_id,srmse\n";
  for (const auto& row : r.rows) {
    if (!row.ok) continue;
    out << row.n_sims << ',' << row.n_summaries << ',' << to_string(row.method) << ',' << row.test_id << ','
        << detail::format_double(row.srmse) << '\n';
  }
  return out.str();
}

inline std::string relative_srmse_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "n_sims,n_summaries,comparison,n_pairs,median,q05,q95\n";
  for (const auto& [local, global] : relative_pairs()) {
    for (const auto& [key, ratios] : srmse_ratios(r, local, global)) {
      out << key.first << ',' << key.second << ',' << to_string(local) << '/' << to_string(global) << ','
          << ratios.size() << ',' << detail::format_double(sample_median(ratios)) << ','
          << detail::format_double(sample_quantile(ratios, 0.05)) << ','
          << detail::format_double(sample_quantile(ratios, 0.95)) << '\n';
    }
  }
  return out.str();
}

/// Mean and 90 % interval of the chosen alpha and component counts per method.
inline std::string chosen_lambda_csv(const ExperimentReport& r) {
  using Key = std::tuple<std::size_t, std::size_t, int>;
  std::map<Key, std::array<std::vector<double>, 3>> values;
  for (const auto& row : r.rows) {
    if (!row.ok) continue;
    auto& v = values[{row.n_sims, row.n_summaries, static_cast<int>(row.method)}];
    if (std::isfinite(row.alpha)) v[0].push_back(row.alpha);
    if (row.initial_components) v[1].push_back(static_cast<double>(row.initial_components));
    if (row.local_components) v[2].push_back(static_cast<double>(row.local_components));
  }
  static const char* names[3] = {"alpha", "initial_components", "local_components"};
  std::ostringstream out;
  out << "n_sims,n_summaries,method,quantity,n,mean,q05,q95\n";
  for (const auto& [key, v] : values) {
    const auto [ns, nq, m] = key;
    for (std::size_t j = 0; j < 3; ++j) {
      if (v[j].empty()) continue;
      out << ns << ',' << nq << ',' << to_string(static_cast<MethodId>(m)) << ',' << names[j] << ',' << v[j].size()
          << ',' << detail::format_double(sample_mean(v[j])) << ','
          << detail::format_double(sample_quantile(v[j], 0.05)) << ','
          << detail::format_double(sample_quantile(v[j], 0.95)) << '\n';
    }
  }
  return out.str();
}

/// Writes srmse_by_method.csv, relative_srmse.csv and chosen_lambda.csv into `out_dir`.
inline void emit_plot_data(const ExperimentReport& r, const std::filesystem::path& out_dir) {
  if (r.rows.empty()) throw ArgumentError("plot data: report is empty");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  detail::write_file(out_dir / "srmse_by_method.csv", srmse_by_method_csv(r));
  detail::write_file(out_dir / "relative_srmse.csv", relative_srmse_csv(r));
  detail::write_file(out_dir / "chosen_lambda.csv", chosen_lambda_csv(r));
}

/// Concatenates reports, e.g. the runs of an (N, n_S) sweep. Parameter names must agree.
inline ExperimentReport merge_reports(const std::vector<ExperimentReport>& parts) {
  ExperimentReport out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i == 0) {
      out.param_names = parts[i].param_names;
    } else if (parts[i].param_names != out.param_names) {
      throw FormatError("cannot merge reports with different parameters");
    }
    out.rows.insert(out.rows.end(), parts[i].rows.begin(), parts[i].rows.end());
  }
  return out;
}

}  // namespace locabc
