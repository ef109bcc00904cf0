#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"

using namespace locabc;

namespace {

SimulationTable random_table(std::size_t n, std::size_t q, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> nd;
  Matrix p(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  Matrix s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(q));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = nd(rng);
    for (std::size_t j = 0; j < q; ++j) {
      // Summaries depend non-linearly on the parameters so localization matters.
      const double base = p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j % d));
      s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          base + 0.3 * base * base * static_cast<double>(j % 3) + 0.5 * nd(rng);
    }
  }
  return SimulationTable(std::move(p), std::move(s));
}

std::vector<double> row_vector(const Matrix& m, std::size_t i) {
  const auto r = row_span(m, static_cast<Eigen::Index>(i));
  return {r.begin(), r.end()};
}

OptimizedProjection optimize_regression(const AnalysisTable& table, const std::vector<double>& alphas,
                                        const OptimizationConfig& cfg, std::span<const double> s_obs) {
  const auto fv = make_global_transformation({}, table);
  return local_projection_optimized(
      fv, [&](const TransformationParams&) { return fv; }, regression_grid(alphas), cfg, s_obs, table);
}

}  // namespace

TEST(RejectionAbc, AcceptAllReturnsEveryRow) {
  const AnalysisTable table(random_table(50, 3, 2, 1));
  const auto id = LinearTransformation::identity(3);
  const auto post = rejection_abc(table, id, table.summary_row(0), 50);
  EXPECT_EQ(post.indices.sorted().indices(), detail::all_rows(50));
  EXPECT_THROW(rejection_abc(table, id, table.summary_row(0), 51), ArgumentError);
  const std::size_t ex[] = {3};
  EXPECT_THROW(rejection_abc(table, id, table.summary_row(0), 50, ex), ArgumentError);
}

TEST(RejectionAbc, ExactRowIsNearest) {
  const AnalysisTable table(random_table(50, 3, 2, 2));
  const auto id = LinearTransformation::identity(3);
  for (std::size_t i : {0u, 17u, 49u}) {
    const auto post = rejection_abc(table, id, table.summary_row(i), 1);
    EXPECT_EQ(post.indices.indices(), (std::vector<std::size_t>{i}));
    EXPECT_EQ(post.params.row(0), table.params().row(static_cast<Eigen::Index>(i)));
  }
}

TEST(RejectionAbc, MatchesFullSortOracle) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const AnalysisTable table(random_table(200, 4, 2, seed));
    const auto t = make_global_transformation({}, table);
    const std::vector<double> s_obs = row_vector(table.summaries(), seed);
    const Matrix z = t.apply_rows(table.summaries());
    const Eigen::RowVectorXd target = t.apply(s_obs).transpose();
    const std::vector<std::size_t> exclude = {seed, seed + 1};
    for (std::size_t k : {1u, 7u, 100u, 198u}) {
      const auto got = rejection_abc(table, t, s_obs, k, exclude);
      EXPECT_EQ(got.indices.indices(), oracle::nearest_rows(z, target, k, exclude)) << seed << " " << k;
    }
  }
}

TEST(RejectionAbc, AcceptanceGrowsWithNAccept) {
  const AnalysisTable table(random_table(120, 3, 1, 5));
  const auto id = LinearTransformation::identity(3);
  const auto full = rejection_abc(table, id, table.summary_row(3), 120);
  for (std::size_t k = 1; k <= 120; k += 7) {
    EXPECT_EQ(rejection_abc(table, id, table.summary_row(3), k).indices, full.indices.prefix(k));
  }
}

TEST(Rmse, Examples) {
  const std::vector<double> a = {0, 2}, b = {1, 3}, c = {4, 4, 4};
  EXPECT_DOUBLE_EQ(rmse(a, 1.0), 1.0);
  EXPECT_NEAR(rmse(b, 0.0), 2.23607, 1e-5);
  EXPECT_DOUBLE_EQ(rmse(b, 0.0), std::sqrt(5.0));
  EXPECT_EQ(rmse(c, 4.0), 0.0);
  EXPECT_THROW(rmse(std::span<const double>{}, 0.0), ArgumentError);
}

TEST(Srmse, AdditivityAndReductions) {
  Matrix s(2, 2);
  s << 0, 1, 2, 3;
  const std::vector<double> truth = {1, 2};  // each column has RMSE 1
  EXPECT_DOUBLE_EQ(srmse(s, truth), 2.0);
  Matrix exact(3, 2);
  exact << 1, 2, 1, 2, 1, 2;
  EXPECT_EQ(srmse(exact, truth), 0.0);
  Matrix one(2, 1);
  one << 1, 3;
  const std::vector<double> zero = {0.0};
  const std::vector<double> col = {1, 3};
  EXPECT_EQ(srmse(one, zero), rmse(col, 0.0));
  const std::vector<double> wrong = {1.0};
  EXPECT_THROW(srmse(s, wrong), DimensionError);
}

TEST(LocalProjection, FullNeighbourhoodEqualsGlobalFit) {
  const AnalysisTable table(random_table(300, 5, 2, 3));
  const auto global = make_global_transformation({}, table);
  const auto local = local_projection(global, {1.0, Method::regression, 0, 0}, table.summary_row(4), table);
  EXPECT_EQ(local.fit_indices(), detail::all_rows(300));
  EXPECT_LT((local.weights() - global.weights()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((local.intercept() - global.intercept()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LocalProjection, NeighbourhoodIsRoundedAlphaN) {
  const AnalysisTable table(random_table(333, 3, 1, 4));
  const auto global = make_global_transformation({}, table);
  const auto local = local_projection(global, {0.1, Method::regression, 0, 0}, table.summary_row(0), table);
  EXPECT_EQ(local.fit_indices().size(), 33u);
  const Matrix z = global.apply_rows(table.summaries());
  auto expected = oracle::nearest_rows(z, z.row(0), 33);
  std::sort(expected.begin(), expected.end());
  EXPECT_EQ(local.fit_indices(), expected);
  EXPECT_THROW(local_projection(global, {0.02, Method::regression, 0, 0}, table.summary_row(0), table),
               TooFewSamplesError);
  EXPECT_THROW(local_projection(global, {0.0, Method::regression, 0, 0}, table.summary_row(0), table), ArgumentError);
}

TEST(LocalProjection, PlsLocalFit) {
  const AnalysisTable table(random_table(400, 6, 2, 6));
  const auto f1 = fit_pls(table.summaries(), table.params(), 2);
  const auto local = local_projection(f1, {0.25, Method::pls, 3, 2}, table.summary_row(9), table);
  EXPECT_EQ(local.kind(), TransformKind::pls);
  EXPECT_EQ(local.n_components(), 3u);
  EXPECT_EQ(local.fit_indices().size(), 100u);
}

TEST(LocalProjection, ToyLocalResidualsBeatGlobal) {
  // Local regression minimizes in-neighbourhood residuals, so it must beat the
  // global line there whenever the link is curved.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto lib = oracle::toy_local_vs_global_library(seed);
    EXPECT_LT(lib.local, lib.global) << seed;
    const auto direct = oracle::toy_local_vs_global(seed);
    EXPECT_LT(direct.local, direct.global) << seed;
  }
}

TEST(DefaultGrids, AlphaAndComponents) {
  const auto a = default_alpha_grid();
  const double expected[] = {-1.5, -1.35, -1.2, -1.05, -0.9, -0.75, -0.6, -0.45, -0.3, -0.15};
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_NEAR(std::log10(a[k]), expected[k], 1e-12);
  EXPECT_EQ(default_component_grid(), (std::vector<std::size_t>{1, 2, 3, 5, 8, 11, 15}));
}

TEST(CandidateGrid, Validation) {
  EXPECT_THROW(CandidateGrid({}), ArgumentError);
  EXPECT_THROW(regression_grid({0.1, 0.1}), ArgumentError);
  EXPECT_THROW(regression_grid({1.5}), ArgumentError);
  EXPECT_THROW(pls_grid({0.5}, {0}, {1}), ArgumentError);
  EXPECT_EQ(pls_grid({0.1, 0.2}, {1, 2}, {1, 3, 5}).size(), 12u);
}

TEST(Optimized, SingletonGridEqualsLocalProjection) {
  const AnalysisTable table(random_table(500, 4, 2, 7));
  const auto s_obs = row_vector(table.summaries(), 11);
  OptimizationConfig cfg;
  cfg.n_valid = 5;
  cfg.n_post = 30;
  const auto out = optimize_regression(table, {0.2}, cfg, s_obs);
  const auto f1 = make_global_transformation({}, table);
  const auto direct = local_projection(f1, {0.2, Method::regression, 0, 0}, s_obs, table);
  EXPECT_EQ(out.transformation.weights(), direct.weights());
  EXPECT_EQ(out.transformation.intercept(), direct.intercept());
  EXPECT_EQ(out.transformation.fit_indices(), direct.fit_indices());
  EXPECT_EQ(out.chosen, (TransformationParams{0.2, Method::regression, 0, 0}));
}

TEST(Optimized, ValidationRowsNeverInTheirOwnPosterior) {
  const AnalysisTable table(random_table(600, 4, 2, 8));
  OptimizationConfig cfg;
  cfg.n_valid = 10;
  cfg.n_post = 50;
  cfg.keep_samples = true;
  const auto out = optimize_regression(table, {0.05, 0.2, 1.0}, cfg, row_vector(table.summaries(), 2));
  std::size_t checked = 0;
  for (const auto& res : out.diagnostics.surface) {
    ASSERT_EQ(res.samples.size(), 10u);
    for (std::size_t v = 0; v < 10; ++v) {
      EXPECT_FALSE(res.samples[v].contains(out.diagnostics.validation[v]));
      EXPECT_EQ(res.samples[v].size(), 50u);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 30u);
}

TEST(Optimized, SurfaceMatchesIndependentRecomputation) {
  const AnalysisTable table(random_table(500, 5, 2, 9));
  const auto s_obs = row_vector(table.summaries(), 0);
  OptimizationConfig cfg;
  cfg.n_valid = 6;
  cfg.n_post = 40;
  cfg.keep_samples = true;
  const std::vector<double> alphas = {0.04, 0.1, 0.5};
  const auto out = optimize_regression(table, alphas, cfg, s_obs);
  const auto fv = make_global_transformation({}, table);

  // I_valid from the full-sort oracle.
  const Matrix zv = fv.apply_rows(table.summaries());
  EXPECT_EQ(out.diagnostics.validation.indices(), oracle::nearest_rows(zv, fv.apply(s_obs).transpose(), 6));

  std::size_t best = 0;
  for (std::size_t g = 0; g < alphas.size(); ++g) {
    const auto& res = out.diagnostics.surface[g];
    ASSERT_TRUE(res.feasible);
    double total = 0.0;
    for (std::size_t v = 0; v < 6; ++v) {
      const std::size_t i = out.diagnostics.validation[v];
      // Bookkeeping: stored SRMSE equals SRMSE of the stored sample.
      EXPECT_EQ(res.srmse_by_validation[v],
                srmse(gather_posterior(table.params(), res.samples[v]), table.param_row(i)));
      // Independent route: Algorithm 1 around row i, then leave-one-out ABC.
      const auto fl = local_projection(fv, {alphas[g], Method::regression, 0, 0}, table.summary_row(i), table);
      const Matrix z = fl.apply_rows(table.summaries());
      const auto rows = oracle::nearest_rows(z, z.row(static_cast<Eigen::Index>(i)), 40, {i});
      EXPECT_EQ(res.samples[v].indices(), rows);
      const double direct = oracle::srmse_of_rows(table.params(), rows, table.params().row(static_cast<Eigen::Index>(i)));
      EXPECT_NEAR(res.srmse_by_validation[v], direct, 1e-12 * (1 + direct));
      total += res.srmse_by_validation[v];
    }
    EXPECT_NEAR(res.srmse_total, total, 1e-12 * (1 + total));
    if (res.srmse_total < out.diagnostics.surface[best].srmse_total) best = g;
  }
  EXPECT_EQ(out.diagnostics.chosen_index, best);
  EXPECT_EQ(out.chosen.alpha, alphas[best]);
}

TEST(Optimized, PicksTheCandidateWithTruthfulPosteriors) {
  // 50 groups of 20 identical rows, theta = s_1 = group. Global regression
  // recovers theta, so leave-one-out posteriors are the other group members
  // (SRMSE 0). A neighbourhood of exactly one group has constant theta, the
  // local fit collapses every row to one point, and ties send the posterior
  // to group 0.
  Matrix p(1000, 1), s(1000, 2);
  for (Eigen::Index i = 0; i < 1000; ++i) {
    const double g = static_cast<double>(i / 20);
    p(i, 0) = g;
    s(i, 0) = g;
    s(i, 1) = static_cast<double>((i / 20) * 7 % 50);
  }
  const AnalysisTable table(SimulationTable(p, s));
  const auto id = LinearTransformation::identity(2);
  OptimizationConfig cfg;
  cfg.n_valid = 5;
  cfg.n_post = 19;
  cfg.keep_samples = true;
  const auto s_obs = row_vector(table.summaries(), 25 * 20);
  const auto out = local_projection_optimized(
      id, [&](const TransformationParams&) { return id; }, regression_grid({0.02, 1.0}), cfg, s_obs, table);

  for (std::size_t v : out.diagnostics.validation) EXPECT_EQ(v / 20, 25u);
  const auto& narrow = out.diagnostics.surface[0];
  const auto& full = out.diagnostics.surface[1];
  EXPECT_EQ(full.srmse_total, 0.0);
  EXPECT_DOUBLE_EQ(narrow.srmse_total, 5 * 25.0);
  for (const auto& smp : narrow.samples)
    for (auto r : smp) EXPECT_EQ(r / 20, 0u);
  EXPECT_EQ(out.diagnostics.chosen_index, 1u);
  EXPECT_EQ(out.chosen.alpha, 1.0);
}

TEST(Optimized, InfeasiblePointsAreSkipped) {
  const AnalysisTable table(random_table(300, 4, 2, 10));
  OptimizationConfig cfg;
  cfg.n_valid = 4;
  cfg.n_post = 20;
  const auto out = optimize_regression(table, {0.01, 0.5}, cfg, row_vector(table.summaries(), 1));
  EXPECT_FALSE(out.diagnostics.surface[0].feasible);
  EXPECT_FALSE(out.diagnostics.surface[0].reason.empty());
  EXPECT_EQ(out.diagnostics.chosen_index, 1u);
  EXPECT_THROW(optimize_regression(table, {0.01}, cfg, row_vector(table.summaries(), 1)), ArgumentError);
  cfg.n_post = 297;
  EXPECT_THROW(optimize_regression(table, {0.5}, cfg, row_vector(table.summaries(), 1)), ArgumentError);
}

TEST(Optimized, PlsComponentsBeyondNeighbourhoodAreInfeasible) {
  const AnalysisTable table(random_table(400, 12, 2, 11));
  const auto fv = fit_pls(table.summaries(), table.params(), 12);
  OptimizationConfig cfg;
  cfg.n_valid = 4;
  cfg.n_post = 30;
  const auto grid = pls_grid({0.025, 0.5}, {2}, {1, 11});
  const auto out = local_projection_optimized(
      fv, [&](const TransformationParams& p) { return fv.truncated(p.initial_components); }, grid, cfg,
      row_vector(table.summaries(), 3), table);
  // alpha 0.025 gives 10 rows, which supports at most 9 components.
  EXPECT_TRUE(out.diagnostics.surface[0].feasible);
  EXPECT_FALSE(out.diagnostics.surface[1].feasible);
  EXPECT_TRUE(out.diagnostics.surface[3].feasible);
}

TEST(Optimized, PlsSurfaceMatchesDirectFits) {
  const AnalysisTable table(random_table(400, 6, 2, 12));
  const auto fv = fit_pls(table.summaries(), table.params(), 6);
  OptimizationConfig cfg;
  cfg.n_valid = 3;
  cfg.n_post = 25;
  cfg.keep_samples = true;
  const auto grid = pls_grid({0.1, 0.3}, {1, 3}, {1, 2, 4});
  const auto factory = [&](const TransformationParams& p) { return fv.truncated(p.initial_components); };
  const auto out = local_projection_optimized(fv, factory, grid, cfg, row_vector(table.summaries(), 5), table);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto& res = out.diagnostics.surface[g];
    ASSERT_TRUE(res.feasible) << g;
    for (std::size_t v = 0; v < 3; ++v) {
      const std::size_t i = out.diagnostics.validation[v];
      const auto fl = local_projection(factory(grid[g]), grid[g], table.summary_row(i), table);
      const Matrix z = fl.apply_rows(table.summaries());
      const auto rows = oracle::nearest_rows(z, z.row(static_cast<Eigen::Index>(i)), 25, {i});
      EXPECT_EQ(res.samples[v].indices(), rows) << g << " " << v;
    }
  }
}

TEST(Optimized, DeterministicAndThreadInvariant) {
  const AnalysisTable table(random_table(500, 5, 2, 13));
  const auto s_obs = row_vector(table.summaries(), 7);
  OptimizationConfig cfg;
  cfg.n_valid = 8;
  cfg.n_post = 40;
  const auto a = optimize_regression(table, default_alpha_grid(), cfg, s_obs);
  const auto b = optimize_regression(table, default_alpha_grid(), cfg, s_obs);
  cfg.threads = 3;
  const auto c = optimize_regression(table, default_alpha_grid(), cfg, s_obs);
  for (const auto* other : {&b, &c}) {
    EXPECT_EQ(a.chosen, other->chosen);
    EXPECT_EQ(a.transformation.weights(), other->transformation.weights());
    for (std::size_t g = 0; g < a.diagnostics.surface.size(); ++g) {
      EXPECT_EQ(a.diagnostics.surface[g].srmse_by_validation, other->diagnostics.surface[g].srmse_by_validation);
    }
  }
}

TEST(GlobalTransformation, Dispatch) {
  Matrix p(40, 2), s(40, 3);
  Rng rng(14);
  std::normal_distribution<double> nd;
  for (Eigen::Index i = 0; i < 40; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) s(i, j) = nd(rng);
    p(i, 0) = 1 + s(i, 0) - 2 * s(i, 2);
    p(i, 1) = -3 + 0.5 * s(i, 1);
  }
  // Summaries are already standardized-like; keep them as-is.
  const AnalysisTable table(s, p, Preprocessor::fit(s));
  const auto reg = make_global_transformation({}, table);
  EXPECT_LT((reg.apply_rows(table.summaries()) - p).cwiseAbs().maxCoeff(), 1e-10);

  MethodSpec id_spec;
  id_spec.method = Method::identity;
  EXPECT_EQ(make_global_transformation(id_spec, table).kind(), TransformKind::identity);

  MethodSpec pls_spec;
  pls_spec.method = Method::pls;
  EXPECT_EQ(pls_spec.selection.max_components, 15u);
  EXPECT_EQ(pls_spec.selection.folds, 10u);
  EXPECT_EQ(pls_spec.selection.threshold_frac, 0.01);
  pls_spec.components = 2;
  EXPECT_EQ(make_global_transformation(pls_spec, table).n_components(), 2u);
  pls_spec.components = 0;
  const auto cv = make_global_transformation(pls_spec, table);
  EXPECT_GE(cv.n_components(), 1u);
  EXPECT_LE(cv.n_components(), 3u);
}
