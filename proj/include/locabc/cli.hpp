#pragma once

// Command-line front end. `cli_main` never throws: usage errors exit 2,
// runtime failures exit 1, each with one diagnostic line on stderr.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "locabc/config.hpp"
#include "locabc/experiment.hpp"
#include "locabc/report.hpp"
#include "locabc/table_io.hpp"

namespace locabc {

inline constexpr int kExitUsage = 2;
inline constexpr int kExitFailure = 1;

namespace detail {

inline nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace detail

/// Audit bundle of a fitted transformation and the preprocessing it expects.
inline nlohmann::json transformation_json(const LinearTransformation& t, const Preprocessor& prep) {
  nlohmann::json j;
  j["format"] = "locabc-transformation-v1";
  j["kind"] = to_string(t.kind());
  j["input_dim"] = t.input_dim();
  j["output_dim"] = t.output_dim();
  j["preprocessor_id"] = t.preprocessor_id();
  j["fit_rows"] = t.fit_indices().size();
  switch (t.kind()) {
    case TransformKind::identity:
      break;
    case TransformKind::regression:
      j["intercept"] = detail::vector_json(t.intercept());
      j["weights"] = detail::matrix_json(t.weights());
      break;
    case TransformKind::pls:
      j["n_components"] = t.n_components();
      j["center"] = detail::vector_json(t.center());
      j["weights"] = detail::matrix_json(t.weights());
      j["y_mean"] = detail::vector_json(t.y_mean());
      j["y_loadings"] = detail::matrix_json(t.y_loadings());
      break;
  }
  nlohmann::json p;
  p["raw_dim"] = prep.raw_dim();
  p["sqrt"] = prep.sqrt_mask();
  p["means"] = detail::vector_json(prep.means());
  p["sds"] = detail::vector_json(prep.sds());
  p["retained"] = prep.retained();
  p["dropped"] = prep.dropped();
  j["preprocessor"] = std::move(p);
  return j;
}

namespace detail {

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out;
};

inline void add_common(CLI::App* cmd, CommonFlags& f, bool out_required, const std::string& out_help) {
  cmd->add_option("--seed", f.seed, "Master seed");
  cmd->add_option("--threads", f.threads, "Worker threads")->check(CLI::PositiveNumber);
  auto* o = cmd->add_option("--out", f.out, out_help);
  if (out_required) o->required();
}

/// Config from an optional file plus `--set key=value` overrides.
inline ExperimentConfig build_config(const std::string& path, const std::vector<std::string>& sets) {
  ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_config(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got '" + kv + "'");
    apply_setting(c, trim(std::string_view(kv).substr(0, eq)), trim(std::string_view(kv).substr(eq + 1)));
  }
  return c;
}

inline void apply_common(ExperimentConfig& c, const CommonFlags& f) {
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.opt.threads = *f.threads;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Rejection ABC with localized projection summaries", "locabc"};
  app.require_subcommand(1);

  // simulate
  detail::CommonFlags sim_flags;
  std::string sim_model, sim_config;
  std::optional<std::size_t> sim_n;
  std::vector<std::string> sim_sets;
  auto* sim = app.add_subcommand("simulate", "Simulate a reference table from the prior");
  sim->add_option("--model", sim_model, "ricker, gk or toy")->check(CLI::IsMember({"ricker", "gk", "toy"}));
  sim->add_option("--n", sim_n, "Number of simulations")->check(CLI::PositiveNumber);
  sim->add_option("--config", sim_config, "Config file for model settings")->check(CLI::ExistingFile);
  sim->add_option("--set", sim_sets, "Config override key=value");
  detail::add_common(sim, sim_flags, true, "Table path (.csv, or .bin / .lfit for the binary cache)");

  // test-data
  detail::CommonFlags td_flags;
  std::string td_model, td_config;
  std::optional<std::size_t> td_n;
  std::vector<std::string> td_sets;
  auto* td = app.add_subcommand("test-data", "Simulate test datasets with known parameters");
  td->add_option("--model", td_model, "ricker, gk or toy")->check(CLI::IsMember({"ricker", "gk", "toy"}));
  td->add_option("--n-test", td_n, "Number of datasets")->check(CLI::PositiveNumber);
  td->add_option("--config", td_config, "Config file")->check(CLI::ExistingFile);
  td->add_option("--set", td_sets, "Config override key=value");
  detail::add_common(td, td_flags, true, "Output table path");

  // run
  detail::CommonFlags run_flags;
  std::string run_config;
  std::vector<std::string> run_sets;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("--config", run_config, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--set", run_sets, "Config override key=value");
  detail::add_common(run, run_flags, false, "Output directory (default: results)");

  // plot-data
  detail::CommonFlags plot_flags;
  std::vector<std::string> plot_reports;
  auto* plot = app.add_subcommand("plot-data", "Write figure-ready CSVs from one or more report.csv files");
  plot->add_option("--report", plot_reports, "report.csv files")->required()->check(CLI::ExistingFile);
  detail::add_common(plot, plot_flags, true, "Output directory");

  // transform
  detail::CommonFlags tr_flags;
  std::string tr_table, tr_method = "reg", tr_observed;
  std::size_t tr_components = 0;
  auto* tr = app.add_subcommand("transform", "Fit one global transformation and write it as JSON");
  tr->add_option("--table", tr_table, "Reference table")->required()->check(CLI::ExistingFile);
  tr->add_option("--method", tr_method, "reg, pls or identity")->check(CLI::IsMember({"reg", "pls", "identity"}));
  tr->add_option("--components", tr_components, "PLS components (0 selects by cross-validation)");
  tr->add_option("--observed", tr_observed, "Table of raw summaries to transform")->check(CLI::ExistingFile);
  detail::add_common(tr, tr_flags, true, "JSON output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    if (const auto nl = msg.find('\n'); nl != std::string::npos) msg.resize(nl);
    err << "locabc: usage error: " << msg << '\n';
    return kExitUsage;
  }

  try {
    if (*sim) {
      ExperimentConfig c = detail::build_config(sim_config, sim_sets);
      if (!sim_model.empty()) c.model.kind = parse_model(sim_model);
      if (sim_n) c.n_sims = *sim_n;
      detail::apply_common(c, sim_flags);
      TableBuildStats stats;
      const auto table = simulate_table(c.model, c.effective_prior(), c.n_sims, c.seed, c.opt.threads, &stats);
      save_table(table, sim_flags.out);
      out << "wrote " << table.n_sims() << " x (" << table.param_dim() << ", " << table.summary_dim() << ") table to "
          << sim_flags.out << " (" << stats.failures << " simulator failures redrawn)\n";
    } else if (*td) {
      ExperimentConfig c = detail::build_config(td_config, td_sets);
      if (!td_model.empty()) c.model.kind = parse_model(td_model);
      if (td_n) c.n_test = *td_n;
      detail::apply_common(c, td_flags);
      const auto theta = test_parameters(c.model.kind, c.effective_prior(), c.n_test, c.test_params);
      const auto tests = simulate_test_datasets(c.model, theta, c.seed, c.opt.threads);
      save_table(tests, td_flags.out);
      out << "wrote " << tests.n_sims() << " test datasets to " << td_flags.out << '\n';
    } else if (*run) {
      ExperimentConfig c;
      try {
        c = detail::build_config(run_config, run_sets);
        detail::apply_common(c, run_flags);
        c.validate();
      } catch (const std::exception& e) {
        err << "locabc: usage error: invalid config: " << e.what() << '\n';
        return kExitUsage;
      }
      const std::filesystem::path dir = run_flags.out.empty() ? "results" : run_flags.out;
      const ExperimentReport report = run_experiment(c);
      write_report(report, dir);
      detail::write_file(dir / "config.cfg", serialize_config(c));
      std::size_t failed = 0;
      for (const auto& r : report.rows) failed += r.ok ? 0 : 1;
      out << "wrote " << report.rows.size() << " report rows (" << failed << " failed) to " << dir.string() << '\n';
    } else if (*plot) {
      std::vector<ExperimentReport> parts;
      for (const auto& p : plot_reports) parts.push_back(read_report_csv(p));
      emit_plot_data(merge_reports(parts), plot_flags.out);
      out << "wrote plot data to " << plot_flags.out << '\n';
    } else if (*tr) {
      const SimulationTable raw = load_table(tr_table);
      const AnalysisTable table(raw);
      MethodSpec spec;
      spec.method = tr_method == "reg" ? Method::regression : tr_method == "pls" ? Method::pls : Method::identity;
      spec.components = tr_components;
      spec.cv_seed = derive_seed(tr_flags.seed.value_or(1), Stream::cv_folds, 0);
      const LinearTransformation t = make_global_transformation(spec, table);
      nlohmann::json j = transformation_json(t, table.preprocessor());
      if (!tr_observed.empty()) {
        const SimulationTable obs = load_table(tr_observed);
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < obs.n_sims(); ++i) {
          const auto p = table.preprocessor().apply(obs.summary_row(static_cast<Eigen::Index>(i)));
          nlohmann::json r;
          r["transformed"] = detail::vector_json(t.apply(as_span(p.values)));
          r["warning"] = p.warning;
          rows.push_back(std::move(r));
        }
        j["observed"] = std::move(rows);
      }
      detail::write_file(tr_flags.out, j.dump(2) + "\n");
      out << "wrote " << to_string(t.kind()) << " transformation (" << t.input_dim() << " -> " << t.output_dim()
          << ") to " << tr_flags.out << '\n';
    }
  } catch (const std::exception& e) {
    err << "locabc: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return 0;
}

}  // namespace locabc
