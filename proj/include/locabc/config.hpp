#pragma once

// Experiment configuration: a flat `key = value` text file.
//
// Blank lines and lines starting with '#' are ignored. Lists are
// comma-separated. Every key is optional; see docs/config.md for the full
// table of keys and defaults.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "locabc/inference.hpp"
#include "locabc/models.hpp"
#include "locabc/table_io.hpp"

namespace locabc {

enum class MethodId { Reg, localReg, localRegopt, PLS, PLSopt, localPLS, localPLSopt };

inline const std::vector<MethodId>& all_methods() {
  static const std::vector<MethodId> all = {MethodId::Reg,    MethodId::localReg, MethodId::localRegopt,
                                            MethodId::PLS,    MethodId::PLSopt,   MethodId::localPLS,
                                            MethodId::localPLSopt};
  return all;
}

inline std::string to_string(MethodId m) {
  switch (m) {
    case MethodId::Reg:
      return "Reg";
    case MethodId::localReg:
      return "localReg";
    case MethodId::localRegopt:
      return "localRegopt";
    case MethodId::PLS:
      return "PLS";
    case MethodId::PLSopt:
      return "PLSopt";
    case MethodId::localPLS:
      return "localPLS";
    case MethodId::localPLSopt:
      return "localPLSopt";
  }
  return "?";
}

inline MethodId parse_method(const std::string& s) {
  for (MethodId m : all_methods()) {
    if (to_string(m) == s) return m;
  }
  throw ArgumentError("unknown method '" + s + "'");
}

struct ExperimentConfig {
  ModelSettings model{};
  std::optional<PriorSpec> prior;  // model default when unset
  std::size_t n_sims = 1000;
  std::size_t n_test = 100;
  std::vector<double> test_params;  // fixed test parameters; empty = model rule
  std::vector<MethodId> methods = {MethodId::Reg};
  std::vector<double> alpha_grid = default_alpha_grid();
  /// Neighbourhood fraction of localReg / localPLS; 0 means 500 / n_sims.
  double local_alpha = 0.0;
  std::vector<std::size_t> pls_components_grid = default_component_grid();
  PlsSelection pls{};
  OptimizationConfig opt{};
  std::uint64_t seed = 1;
  /// Test datasets processed concurrently; never changes the report.
  std::size_t test_threads = 1;
  std::string table_path;      // load instead of simulating when set
  std::string test_data_path;  // load test datasets when set

  PriorSpec effective_prior() const { return prior ? *prior : default_prior(model.kind); }
  double effective_local_alpha(std::size_t n) const {
    return local_alpha > 0.0 ? local_alpha : std::min(1.0, 500.0 / static_cast<double>(n));
  }

  friend bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    const auto same_model = a.model.kind == b.model.kind && a.model.ricker.steps == b.model.ricker.steps &&
                            a.model.ricker.burn_in == b.model.ricker.burn_in &&
                            a.model.ricker.initial_state == b.model.ricker.initial_state &&
                            a.model.gk_n == b.model.gk_n && a.model.n_quantiles == b.model.n_quantiles &&
                            a.model.gk_c == b.model.gk_c && a.model.toy_noise_sd == b.model.toy_noise_sd;
    const auto same_opt = a.opt.n_valid == b.opt.n_valid && a.opt.n_post == b.opt.n_post &&
                          a.opt.n_final == b.opt.n_final && a.opt.threads == b.opt.threads;
    const auto same_pls = a.pls.max_components == b.pls.max_components && a.pls.folds == b.pls.folds &&
                          a.pls.threshold_frac == b.pls.threshold_frac;
    return same_model && same_opt && same_pls && a.prior == b.prior && a.n_sims == b.n_sims && a.n_test == b.n_test &&
           a.test_params == b.test_params && a.methods == b.methods && a.alpha_grid == b.alpha_grid &&
           a.local_alpha == b.local_alpha && a.pls_components_grid == b.pls_components_grid && a.seed == b.seed && a.test_threads == b.test_threads &&
           a.table_path == b.table_path && a.test_data_path == b.test_data_path;
  }

  void validate() const {
    if (n_sims < 1 || n_test < 1) throw ArgumentError("config: n_sims and n_test must be positive");
    if (test_threads < 1 || opt.threads < 1) throw ArgumentError("config: thread counts must be positive");
    if (methods.empty()) throw ArgumentError("config: methods must not be empty");
    if (alpha_grid.empty()) throw ArgumentError("config: alpha_grid must not be empty");
    for (double a : alpha_grid) {
      if (!(a > 0.0 && a <= 1.0)) throw ArgumentError("config: alpha_grid values must lie in (0, 1]");
    }
    if (local_alpha < 0.0 || local_alpha > 1.0) throw ArgumentError("config: local_alpha must lie in [0, 1]");
    if (pls_components_grid.empty()) throw ArgumentError("config: pls_components_grid must not be empty");
    for (auto c : pls_components_grid) {
      if (c < 1) throw ArgumentError("config: component counts must be positive");
    }
    if (pls.max_components < 1 || pls.folds < 2) throw ArgumentError("config: bad PLS selection settings");
    if (opt.n_valid < 1 || opt.n_post < 1 || opt.n_final < 1) throw ArgumentError("config: counts must be positive");
    if (model.kind == ModelKind::gk && model.n_quantiles > model.gk_n) {
      throw ArgumentError("config: n_quantiles exceeds the g-and-k dataset size");
    }
    effective_prior();
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

inline double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  if (!parse_double(v, out)) throw ArgumentError("config: '" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline std::uint64_t parse_count(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ArgumentError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& v, F&& item) {
  std::vector<T> out;
  if (trim(v).empty()) return out;
  for (const auto part : split(v, ',')) out.push_back(item(trim(part)));
  return out;
}

}  // namespace detail

/// Applies one `key = value` setting.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  const auto count = [&](const std::string& v) { return static_cast<std::size_t>(parse_count(key, v)); };
  const auto real = [&](const std::string& v) { return parse_real(key, v); };
  if (key == "model") {
    c.model.kind = parse_model(value);
  } else if (key == "prior") {
    std::vector<std::array<double, 2>> ranges;
    for (const auto part : split(value, ';')) {
      const auto b = split(part, ':');
      if (b.size() != 2) throw ArgumentError("config: prior expects lo:hi;lo:hi;...");
      ranges.push_back({real(trim(b[0])), real(trim(b[1]))});
    }
    c.prior = PriorSpec(std::move(ranges));
  } else if (key == "n_sims") {
    c.n_sims = count(value);
  } else if (key == "n_test") {
    c.n_test = count(value);
  } else if (key == "test_params") {
    c.test_params = parse_list<double>(value, real);
  } else if (key == "methods") {
    c.methods = parse_list<MethodId>(value, [](const std::string& s) { return parse_method(s); });
  } else if (key == "alpha_grid") {
    c.alpha_grid = parse_list<double>(value, real);
  } else if (key == "local_alpha") {
    c.local_alpha = real(value);
  } else if (key == "pls_components_grid") {
    c.pls_components_grid = parse_list<std::size_t>(value, count);
  } else if (key == "pls_max_components") {
    c.pls.max_components = count(value);
  } else if (key == "cv_folds") {
    c.pls.folds = count(value);
  } else if (key == "cv_threshold") {
    c.pls.threshold_frac = real(value);
  } else if (key == "n_valid") {
    c.opt.n_valid = count(value);
  } else if (key == "n_post") {
    c.opt.n_post = count(value);
  } else if (key == "n_final") {
    c.opt.n_final = count(value);
  } else if (key == "threads") {
    c.opt.threads = count(value);
  } else if (key == "test_threads") {
    c.test_threads = count(value);
  } else if (key == "seed") {
    c.seed = parse_count(key, value);
  } else if (key == "n_quantiles") {
    c.model.n_quantiles = count(value);
  } else if (key == "gk_n") {
    c.model.gk_n = count(value);
  } else if (key == "gk_c") {
    c.model.gk_c = real(value);
  } else if (key == "ricker_steps") {
    c.model.ricker.steps = count(value);
  } else if (key == "ricker_burn_in") {
    c.model.ricker.burn_in = count(value);
  } else if (key == "ricker_n0") {
    c.model.ricker.initial_state = real(value);
  } else if (key == "toy_noise_sd") {
    c.model.toy_noise_sd = real(value);
  } else if (key == "table") {
    c.table_path = value;
  } else if (key == "test_data") {
    c.test_data_path = value;
  } else {
    throw ArgumentError("config: unknown key '" + key + "'");
  }
}

inline ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("config: expected key = value", line_no, 1);
    const std::string key = detail::trim(std::string_view(t).substr(0, eq));
    const std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    try {
      apply_setting(c, key, value);
    } catch (const ArgumentError& e) {
      throw ParseError(e.what(), line_no, 1);
    }
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

inline std::string serialize_config(const ExperimentConfig& c) {
  using detail::format_double;
  std::ostringstream out;
  const auto join_reals = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
    return s;
  };
  out << "model = " << to_string(c.model.kind) << '\n';
  if (c.prior) {
    out << "prior = ";
    const auto& r = c.prior->ranges();
    for (std::size_t j = 0; j < r.size(); ++j) {
      out << (j ? ";" : "") << format_double(r[j][0]) << ':' << format_double(r[j][1]);
    }
    out << '\n';
  }
  out << "n_sims = " << c.n_sims << '\n';
  out << "n_test = " << c.n_test << '\n';
  if (!c.test_params.empty()) out << "test_params = " << join_reals(c.test_params) << '\n';
  out << "methods = ";
  for (std::size_t i = 0; i < c.methods.size(); ++i) out << (i ? "," : "") << to_string(c.methods[i]);
  out << '\n';
  out << "alpha_grid = " << join_reals(c.alpha_grid) << '\n';
  out << "local_alpha = " << format_double(c.local_alpha) << '\n';
  out << "pls_components_grid = ";
  for (std::size_t i = 0; i < c.pls_components_grid.size(); ++i) out << (i ? "," : "") << c.pls_components_grid[i];
  out << '\n';
  out << "pls_max_components = " << c.pls.max_components << '\n';
  out << "cv_folds = " << c.pls.folds << '\n';
  out << "cv_threshold = " << format_double(c.pls.threshold_frac) << '\n';
  out << "n_valid = " << c.opt.n_valid << '\n';
  out << "n_post = " << c.opt.n_post << '\n';
  out << "n_final = " << c.opt.n_final << '\n';
  out << "threads = " << c.opt.threads << '\n';
  out << "test_threads = " << c.test_threads << '\n';
  out << "seed = " << c.seed << '\n';
  out << "n_quantiles = " << c.model.n_quantiles << '\n';
  out << "gk_n = " << c.model.gk_n << '\n';
  out << "gk_c = " << format_double(c.model.gk_c) << '\n';
  out << "ricker_steps = " << c.model.ricker.steps << '\n';
  out << "ricker_burn_in = " << c.model.ricker.burn_in << '\n';
  out << "ricker_n0 = " << format_double(c.model.ricker.initial_state) << '\n';
  out << "toy_noise_sd = " << format_double(c.model.toy_noise_sd) << '\n';
  if (!c.table_path.empty()) out << "table = " << c.table_path << '\n';
  if (!c.test_data_path.empty()) out << "test_data = " << c.test_data_path << '\n';
  return out.str();
}

}  // namespace locabc
