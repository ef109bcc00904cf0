#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "locabc/cli.hpp"
#include "locabc/locabc.hpp"

using namespace locabc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "locabc_test_harness" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string first_line(const std::string& text) { return text.substr(0, text.find('\n')); }

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "locabc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

ExperimentConfig toy_config() {
  ExperimentConfig c;
  c.model.kind = ModelKind::toy;
  c.n_sims = 1000;
  c.n_test = 6;
  c.opt.n_valid = 5;
  c.opt.n_post = 50;
  c.opt.n_final = 50;
  return c;
}

ReportRow row(std::size_t test, MethodId m, double srmse) {
  ReportRow r;
  r.test_id = test;
  r.method = m;
  r.n_sims = 1000;
  r.n_summaries = 10;
  r.ok = true;
  r.srmse = srmse;
  r.rmse = {srmse};
  return r;
}

const std::string kConfigDir = LOCABC_SOURCE_DIR "/configs";

}  // namespace

TEST(Config, RoundTrip) {
  ExperimentConfig c;
  c.model.kind = ModelKind::gk;
  c.prior = PriorSpec({{0.0, 10.0}, {0.5, 2.0}, {0.0, 4.0}, {0.0, 1.0}});
  c.n_sims = 1234;
  c.test_params = {3, 1, 2, 0.5};
  c.methods = {MethodId::PLS, MethodId::localPLSopt};
  c.alpha_grid = {0.1, 1.0 / 3.0};
  c.local_alpha = 0.25;
  c.pls_components_grid = {1, 4};
  c.pls.threshold_frac = 0.005;
  c.opt.n_valid = 7;
  c.seed = 99;
  c.test_threads = 2;
  c.model.gk_n = 500;
  c.model.n_quantiles = 25;
  c.model.gk_c = 0.7;
  EXPECT_EQ(parse_config(serialize_config(c)), c);
  EXPECT_EQ(parse_config(serialize_config(ExperimentConfig{})), ExperimentConfig{});
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("no_such_key = 1\n"), ParseError);
  try {
    parse_config("model = gk\n\nn_sims = -3\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 3u);
  }
  EXPECT_THROW(parse_config("methods = Reg,Nope\n"), ParseError);
  EXPECT_THROW(parse_config("alpha_grid = 0.5,2\n"), ArgumentError);
  EXPECT_THROW(parse_config("just words\n"), ParseError);
}

TEST(Config, ShippedConfigsParse) {
  for (const char* name : {"toy.cfg", "gk_small.cfg", "gk_desk.cfg", "ricker_desk.cfg"}) {
    EXPECT_NO_THROW(load_config(kConfigDir + "/" + name)) << name;
  }
  const auto desk = load_config(kConfigDir + "/gk_desk.cfg");
  EXPECT_EQ(desk.n_sims, 25000u);
  EXPECT_EQ(desk.model.n_quantiles, 25u);
}

TEST(Experiment, ToySmoke) {
  const auto c = toy_config();
  const auto r = run_experiment(c);
  ASSERT_EQ(r.rows.size(), c.n_test);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.ok) << row.error;
    EXPECT_TRUE(std::isfinite(row.srmse));
    EXPECT_EQ(row.n_sims, 1000u);
    EXPECT_EQ(row.n_summaries, 1u);
  }
  EXPECT_EQ(r.param_names, (std::vector<std::string>{"theta"}));
}

TEST(Experiment, AllMethodsOnSmallGk) {
  auto c = load_config(kConfigDir + "/gk_small.cfg");
  const auto r = run_experiment(c);
  ASSERT_EQ(r.rows.size(), c.n_test * 7);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(row.ok) << to_string(row.method) << ": " << row.error;
    EXPECT_EQ(row.rmse.size(), 4u);
    double sum = 0;
    for (double v : row.rmse) sum += v;
    EXPECT_NEAR(row.srmse, sum, 1e-12 * (1 + sum));
    if (row.method == MethodId::localRegopt || row.method == MethodId::localPLSopt) {
      EXPECT_TRUE(std::isfinite(row.alpha));
    }
  }
  EXPECT_FALSE(r.diagnostics.empty());
  std::size_t chosen = 0;
  for (const auto& d : r.diagnostics) chosen += d.chosen ? 1 : 0;
  EXPECT_EQ(chosen, c.n_test * 3);  // one per optimized (test, method)
}

TEST(Experiment, ReportIsByteIdenticalAcrossRunsAndThreads) {
  auto c = load_config(kConfigDir + "/gk_small.cfg");
  c.n_test = 3;
  const std::string a = report_csv(run_experiment(c));
  const std::string b = report_csv(run_experiment(c));
  EXPECT_EQ(a, b);
  c.test_threads = 3;
  EXPECT_EQ(report_csv(run_experiment(c)), a);
  c.test_threads = 1;
  c.opt.threads = 2;
  EXPECT_EQ(report_csv(run_experiment(c)), a);
}

TEST(Experiment, FailuresAreCapturedPerRow) {
  auto c = toy_config();
  c.methods = {MethodId::Reg, MethodId::localReg};
  c.local_alpha = 0.005;  // 5 rows, below the minimum fit size
  const auto r = run_experiment(c);
  for (const auto& row : r.rows) {
    if (row.method == MethodId::Reg) {
      EXPECT_TRUE(row.ok);
    } else {
      EXPECT_FALSE(row.ok);
      EXPECT_FALSE(row.error.empty());
    }
  }
  const auto parsed = parse_report_csv(report_csv(r));
  EXPECT_FALSE(parsed.rows[1].ok);
  EXPECT_EQ(parsed.rows[1].error, r.rows[1].error);
}

TEST(Report, ParseRoundTrip) {
  auto c = load_config(kConfigDir + "/gk_small.cfg");
  c.n_test = 2;
  const auto r = run_experiment(c);
  const std::string text = report_csv(r);
  const auto back = parse_report_csv(text);
  EXPECT_EQ(report_csv(back), text);
  EXPECT_EQ(back.param_names, r.param_names);
}

TEST(Report, GoldenHeaders) {
  ExperimentReport r;
  r.param_names = {"A", "B"};
  EXPECT_EQ(first_line(report_csv(r)),
            "test_id,method,n_sims,n_summaries,status,srmse,rmse_A,rmse_B,alpha,initial_components,local_components,"
            "warning,error");
  EXPECT_EQ(first_line(summary_csv(r)), "method,n_tests,n_failed,mean_srmse,median_srmse,q05_srmse,q95_srmse");
  EXPECT_EQ(first_line(timing_csv(r)), "scope,test_id,method,seconds");
  EXPECT_EQ(first_line(diagnostics_csv(r)),
            "test_id,method,grid_index,alpha,initial_components,local_components,feasible,chosen,srmse_total");
  EXPECT_EQ(srmse_by_method_csv(r), "n_sims,n_summaries,method,test_id,srmse\n");
  EXPECT_EQ(relative_srmse_csv(r), "n_sims,n_summaries,comparison,n_pairs,median,q05,q95\n");
  EXPECT_EQ(chosen_lambda_csv(r), "n_sims,n_summaries,method,quantity,n,mean,q05,q95\n");
}

TEST(Report, Quantiles) {
  EXPECT_EQ(sample_median({0.5, 1.0, 2.0}), 1.0);
  EXPECT_EQ(sample_median({1.0, 2.0, 3.0, 4.0}), 2.5);
  EXPECT_DOUBLE_EQ(sample_quantile({1, 2, 3, 4, 5}, 0.95), 4.8);
  EXPECT_EQ(sample_mean({1, 2, 6}), 3.0);
}

TEST(PlotData, SingleMethodHasHeaderOnlyRelativeFile) {
  ExperimentReport r;
  r.param_names = {"theta"};
  for (std::size_t t = 0; t < 3; ++t) r.rows.push_back(row(t, MethodId::Reg, 1.0 + t));
  const auto dir = scratch("single");
  emit_plot_data(r, dir);
  EXPECT_EQ(slurp(dir / "relative_srmse.csv"), "n_sims,n_summaries,comparison,n_pairs,median,q05,q95\n");
  EXPECT_EQ(slurp(dir / "srmse_by_method.csv"),
            "n_sims,n_summaries,method,test_id,srmse\n1000,10,Reg,0,1\n1000,10,Reg,1,2\n1000,10,Reg,2,3\n");
  EXPECT_THROW(emit_plot_data(ExperimentReport{}, dir), ArgumentError);
}

TEST(PlotData, RatiosArePairedPerTest) {
  ExperimentReport r;
  r.param_names = {"theta"};
  const double global[] = {2.0, 1.0, 4.0};
  const double local[] = {1.0, 1.0, 8.0};  // ratios 0.5, 1, 2
  for (std::size_t t = 0; t < 3; ++t) {
    r.rows.push_back(row(t, MethodId::Reg, global[t]));
    r.rows.push_back(row(t, MethodId::localReg, local[t]));
  }
  const auto text = relative_srmse_csv(r);
  std::istringstream in(text);
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(line, "1000,10,localReg/Reg,3,1,0.55,1.9");
  // Every value is recomputable from the raw report rows.
  const auto ratios = srmse_ratios(r, MethodId::localReg, MethodId::Reg).at({1000, 10});
  EXPECT_EQ(ratios, (std::vector<double>{0.5, 1.0, 2.0}));
}

TEST(PlotData, ChosenLambdaSummaries) {
  ExperimentReport r;
  r.param_names = {"theta"};
  for (std::size_t t = 0; t < 4; ++t) {
    auto x = row(t, MethodId::localPLSopt, 1.0);
    x.alpha = 0.1 * static_cast<double>(t + 1);
    x.initial_components = 2;
    x.local_components = t + 1;
    r.rows.push_back(x);
  }
  const auto text = chosen_lambda_csv(r);
  EXPECT_NE(text.find("1000,10,localPLSopt,alpha,4,0.25,"), std::string::npos);
  EXPECT_NE(text.find("1000,10,localPLSopt,initial_components,4,2,2,2\n"), std::string::npos);
  EXPECT_NE(text.find("1000,10,localPLSopt,local_components,4,2.5,"), std::string::npos);
}

TEST(Cli, MissingConfigIsUsageError) {
  const auto r = cli({"run", "--config", "/nonexistent/config.cfg"});
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_FALSE(r.err.empty());
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, UnknownFlagAndMissingSubcommand) {
  EXPECT_EQ(cli({"run", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(cli({}).code, kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, InvalidConfigIsUsageError) {
  const auto dir = scratch("invalid");
  std::ofstream(dir / "bad.cfg") << "n_sims = 0\n";
  EXPECT_EQ(cli({"run", "--config", (dir / "bad.cfg").string()}).code, kExitUsage);
}

TEST(Cli, SimulateRickerTable) {
  const auto dir = scratch("simulate");
  const auto path = (dir / "t.csv").string();
  const auto r = cli({"simulate", "--model", "ricker", "--n", "1000", "--seed", "1", "--out", path});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = load_table(path);
  EXPECT_EQ(t.n_sims(), 1000u);
  EXPECT_EQ(t.param_dim(), 3u);
  EXPECT_EQ(t.summary_dim(), 124u);
  EXPECT_EQ(cli({"simulate", "--model", "ricker", "--n", "1000", "--seed", "1", "--out", (dir / "t.bin").string()})
                .code,
            0);
  EXPECT_EQ(load_table(dir / "t.bin"), t);
}

TEST(Cli, RunTwiceGivesIdenticalOutputs) {
  const auto a = scratch("run_a"), b = scratch("run_b");
  const auto cfg = kConfigDir + "/gk_small.cfg";
  ASSERT_EQ(cli({"run", "--config", cfg, "--seed", "7", "--set", "n_test=2", "--out", a.string()}).code, 0);
  ASSERT_EQ(cli({"run", "--config", cfg, "--seed", "7", "--set", "n_test=2", "--out", b.string()}).code, 0);
  for (const char* f : {"report.csv", "summary.csv", "diagnostics.csv", "config.cfg"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty()) << f;
  }
  EXPECT_TRUE(fs::exists(a / "timing.csv"));
  // The saved config reproduces the run.
  const auto c = fs::path(a / "config.cfg").string();
  const auto again = scratch("run_c");
  ASSERT_EQ(cli({"run", "--config", c, "--out", again.string()}).code, 0);
  EXPECT_EQ(slurp(again / "report.csv"), slurp(a / "report.csv"));

  const auto plots = scratch("plots");
  ASSERT_EQ(cli({"plot-data", "--report", (a / "report.csv").string(), "--out", plots.string()}).code, 0);
  EXPECT_EQ(first_line(slurp(plots / "relative_srmse.csv")), "n_sims,n_summaries,comparison,n_pairs,median,q05,q95");
  const std::string by_method = slurp(plots / "srmse_by_method.csv");
  EXPECT_EQ(std::count(by_method.begin(), by_method.end(), '\n'), 1 + 2 * 7);
}

TEST(Cli, TestDataAndTransform) {
  const auto dir = scratch("transform");
  ASSERT_EQ(cli({"simulate", "--model", "gk", "--n", "400", "--set", "gk_n=300", "--set", "n_quantiles=8", "--out",
                 (dir / "table.csv").string()})
                .code,
            0);
  ASSERT_EQ(cli({"test-data", "--model", "gk", "--n-test", "3", "--set", "gk_n=300", "--set", "n_quantiles=8",
                 "--out", (dir / "tests.csv").string()})
                .code,
            0);
  EXPECT_EQ(load_table(dir / "tests.csv").n_sims(), 3u);
  const auto r = cli({"transform", "--table", (dir / "table.csv").string(), "--method", "pls", "--components", "2",
                      "--observed", (dir / "tests.csv").string(), "--out", (dir / "t.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(dir / "t.json"));
  EXPECT_EQ(j["format"], "locabc-transformation-v1");
  EXPECT_EQ(j["kind"], "pls");
  EXPECT_EQ(j["n_components"], 2);
  EXPECT_EQ(j["observed"].size(), 3u);
  EXPECT_EQ(j["observed"][0]["transformed"].size(), 2u);
  EXPECT_EQ(j["preprocessor"]["raw_dim"], 8);
  EXPECT_EQ(cli({"transform", "--table", (dir / "table.csv").string(), "--method", "nope", "--out",
                 (dir / "x.json").string()})
                .code,
            kExitUsage);
  EXPECT_EQ(cli({"transform", "--table", (dir / "table.csv").string(), "--components", "99", "--method", "pls",
                 "--out", (dir / "x.json").string()})
                .code,
            kExitFailure);
}

TEST(Cli, BinaryRunsAsAProcess) {
  const std::string cmd = std::string("\"") + LOCABC_CLI_PATH + "\" --help > /dev/null";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  const std::string bad = std::string("\"") + LOCABC_CLI_PATH + "\" run --config /nonexistent.cfg 2> /dev/null";
  EXPECT_NE(std::system(bad.c_str()), 0);
}
