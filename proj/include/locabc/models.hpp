#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "locabc/core.hpp"
#include "locabc/rng.hpp"
#include "locabc/simulators.hpp"
#include "locabc/summaries.hpp"

namespace locabc {

enum class ModelKind { ricker, gk, toy };

inline std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::ricker:
      return "ricker";
    case ModelKind::gk:
      return "gk";
    case ModelKind::toy:
      return "toy";
  }
  return "?";
}

inline ModelKind parse_model(const std::string& s) {
  if (s == "ricker") return ModelKind::ricker;
  if (s == "gk") return ModelKind::gk;
  if (s == "toy") return ModelKind::toy;
  throw ArgumentError("unknown model '" + s + "' (expected ricker, gk or toy)");
}

/// Simulator settings for one model. Together with a prior and a seed these
/// determine a simulation table completely.
struct ModelSettings {
  ModelKind kind = ModelKind::toy;
  RickerConfig ricker{};
  std::size_t gk_n = 10000;
  std::size_t n_quantiles = 200;
  double gk_c = 0.8;
  double toy_noise_sd = 0.5;
};

/// Priors on the sampling scale: Ricker draws (log r, log sigma_e, phi).
inline PriorSpec default_prior(ModelKind kind) {
  switch (kind) {
    case ModelKind::ricker:
      return PriorSpec({{0.0, 10.0}, {std::log(0.1), 0.0}, {0.0, 100.0}});
    case ModelKind::gk:
      return PriorSpec({{0.0, 10.0}, {0.0, 10.0}, {0.0, 10.0}, {0.0, 10.0}});
    case ModelKind::toy:
      return PriorSpec({{0.0, 10.0}});
  }
  return PriorSpec({{0.0, 1.0}});
}

inline std::vector<std::string> param_names(ModelKind kind) {
  switch (kind) {
    case ModelKind::ricker:
      return {"log_r", "sigma_e", "phi"};
    case ModelKind::gk:
      return {"A", "B", "g", "k"};
    case ModelKind::toy:
      return {"theta"};
  }
  return {};
}

inline std::vector<std::string> summary_names(const ModelSettings& s) {
  switch (s.kind) {
    case ModelKind::ricker:
      return ricker_summary_names();
    case ModelKind::gk:
      return gk_summary_names(s.n_quantiles);
    case ModelKind::toy:
      return {"s"};
  }
  return {};
}

/// Maps a prior draw to the stored parameter vector. The Ricker prior is
/// uniform on log sigma_e while the inferred parameter is sigma_e itself.
inline Vector table_params_from_draw(ModelKind kind, const Vector& draw) {
  Vector theta = draw;
  if (kind == ModelKind::ricker) theta[1] = std::exp(draw[1]);
  return theta;
}

/// Runs the simulator at `theta` (stored scale) and returns the raw candidate summaries.
inline Vector simulate_summaries(const ModelSettings& s, const Vector& theta, Rng& rng) {
  switch (s.kind) {
    case ModelKind::ricker: {
      if (s.ricker.steps - s.ricker.burn_in != kRickerObservations) {
        throw ArgumentError("ricker summaries need exactly 50 retained observations");
      }
      const RickerParams p{theta[0], theta[1], theta[2]};
      return ricker_summaries(simulate_ricker(p, s.ricker, rng));
    }
    case ModelKind::gk: {
      const GkParams p{theta[0], theta[1], theta[2], theta[3], s.gk_c};
      return gk_summaries(simulate_gk(p, s.gk_n, rng), s.n_quantiles);
    }
    case ModelKind::toy: {
      Vector out(1);
      out[0] = simulate_toy(theta[0], s.toy_noise_sd, rng);
      return out;
    }
  }
  throw ArgumentError("unknown model");
}

struct TableBuildStats {
  std::size_t failures = 0;  // simulator failures replaced by fresh draws
};

/// Builds an N-row reference table from the prior.
///
/// Row i uses the stream derive_seed(seed, table, i). If the simulator
/// fails, the row is redrawn from a retry stream and the failure counted, so
/// no row is silently clamped or dropped.
inline SimulationTable simulate_table(const ModelSettings& s, const PriorSpec& prior, std::size_t n_sims,
                                      std::uint64_t seed, std::size_t threads = 1,
                                      TableBuildStats* stats = nullptr) {
  if (n_sims < 1) throw ArgumentError("simulate_table: need at least one simulation");
  const std::size_t d = param_names(s.kind).size();
  if (prior.dim() != d) throw DimensionError("simulate_table: prior dimension does not match the model");
  const auto names = summary_names(s);
  Matrix params(static_cast<Eigen::Index>(n_sims), static_cast<Eigen::Index>(d));
  Matrix summaries(static_cast<Eigen::Index>(n_sims), static_cast<Eigen::Index>(names.size()));
  std::vector<std::size_t> failures(n_sims, 0);

  parallel_for(n_sims, threads, [&](std::size_t i) {
    constexpr std::size_t kMaxAttempts = 1000;
    for (std::size_t attempt = 0; attempt < kMaxAttempts; ++attempt) {
      Rng rng = attempt == 0 ? make_rng(seed, Stream::table, i)
                             : make_rng(derive_seed(seed, Stream::retry, i), Stream::table, attempt);
      const Vector theta = table_params_from_draw(s.kind, sample_prior(prior, rng));
      try {
        const Vector summary = simulate_summaries(s, theta, rng);
        params.row(static_cast<Eigen::Index>(i)) = theta.transpose();
        summaries.row(static_cast<Eigen::Index>(i)) = summary.transpose();
        return;
      } catch (const SimulationFailure&) {
        ++failures[i];
      }
    }
    throw SimulationFailure("simulate_table: row " + std::to_string(i) + " failed every attempt");
  });

  if (stats) {
    stats->failures = 0;
    for (auto f : failures) stats->failures += f;
  }
  TableMeta meta;
  meta.model = to_string(s.kind);
  meta.prior = prior.ranges();
  meta.seed = seed;
  meta.param_names = param_names(s.kind);
  meta.summary_names = names;
  return SimulationTable(std::move(params), std::move(summaries), std::move(meta));
}

/// Parameters of the test datasets.
///
///  - ricker: log r = 3.8, phi = 10, log sigma_e on an evenly spaced grid over
///    [log 0.1, 0] including both endpoints.
///  - gk: (A, B, g, k) = (3, 1, 2, 0.5) for every dataset.
///  - toy: theta at the midpoints of n_test equal cells of the prior range.
///
/// A non-empty `fixed` vector overrides the rule for every model.
inline Matrix test_parameters(ModelKind kind, const PriorSpec& prior, std::size_t n_test,
                              const std::vector<double>& fixed = {}) {
  if (n_test < 1) throw ArgumentError("test datasets: n_test must be positive");
  const std::size_t d = param_names(kind).size();
  Matrix theta(static_cast<Eigen::Index>(n_test), static_cast<Eigen::Index>(d));
  if (!fixed.empty()) {
    if (fixed.size() != d) throw DimensionError("test datasets: fixed parameter vector has the wrong length");
    for (std::size_t k = 0; k < n_test; ++k)
      for (std::size_t j = 0; j < d; ++j) theta(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = fixed[j];
    return theta;
  }
  for (std::size_t k = 0; k < n_test; ++k) {
    const auto r = static_cast<Eigen::Index>(k);
    switch (kind) {
      case ModelKind::ricker: {
        const double lo = std::log(0.1);
        const double frac = n_test == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(n_test - 1);
        theta(r, 0) = 3.8;
        theta(r, 1) = std::exp(lo + (0.0 - lo) * frac);
        theta(r, 2) = 10.0;
        break;
      }
      case ModelKind::gk:
        theta.row(r) << 3.0, 1.0, 2.0, 0.5;
        break;
      case ModelKind::toy: {
        const auto [lo, hi] = prior.ranges()[0];
        theta(r, 0) = lo + (hi - lo) * (static_cast<double>(k) + 0.5) / static_cast<double>(n_test);
        break;
      }
    }
  }
  return theta;
}

/// Simulates one dataset per row of `theta`; dataset k uses derive_seed(seed, test_data, k).
inline SimulationTable simulate_test_datasets(const ModelSettings& s, const Matrix& theta, std::uint64_t seed,
                                              std::size_t threads = 1) {
  const auto names = summary_names(s);
  Matrix summaries(theta.rows(), static_cast<Eigen::Index>(names.size()));
  parallel_for(static_cast<std::size_t>(theta.rows()), threads, [&](std::size_t k) {
    Rng rng = make_rng(seed, Stream::test_data, k);
    const Vector t = theta.row(static_cast<Eigen::Index>(k)).transpose();
    summaries.row(static_cast<Eigen::Index>(k)) = simulate_summaries(s, t, rng).transpose();
  });
  TableMeta meta;
  meta.model = to_string(s.kind);
  meta.seed = seed;
  meta.param_names = param_names(s.kind);
  meta.summary_names = names;
  return SimulationTable(theta, std::move(summaries), std::move(meta));
}

}  // namespace locabc
