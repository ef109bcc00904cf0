#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "locabc/core.hpp"
#include "locabc/rng.hpp"

namespace locabc {

/// Observations produced by one simulator run.
using Dataset = std::vector<double>;

// ---------------------------------------------------------------------------
// Standard normal quantile

/// Inverse of the standard normal CDF (Wichura, AS 241, PPND16).
///
/// Relative accuracy is about 1e-16 over the whole open unit interval.
inline double standard_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("standard_normal_quantile: probability must lie in (0, 1)");
  }
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((r * 2509.0809287301226727 + 33430.575583588128105) * r + 67265.770927008700853) * r +
                45921.953931549871457) * r + 13731.693765509461125) * r + 1971.5909503065514427) * r +
             133.14166789178437745) * r + 3.387132872796366608) /
           (((((((r * 5226.495278852545925 + 28729.085735721942674) * r + 39307.89580009271061) * r +
                21213.794301586595867) * r + 5394.1960214247511077) * r + 687.1870074920579083) * r +
             42.313330701600911252) * r + 1.0);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val = 0.0;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r + 0.24178072517745061177) * r +
               1.27045825245236838258) * r + 3.64784832476320460504) * r + 5.7694972214606914055) * r +
            4.6303378461565452959) * r + 1.42343711074968357734) /
          (((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
               0.14810397642748007459) * r + 0.68976733498510000455) * r + 1.6763848301838038494) * r +
            2.05319162663775882187) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
               0.026532189526576123093) * r + 0.29656057182850489123) * r + 1.7848265399172913358) * r +
            5.4637849111641143699) * r + 6.6579046435011037772) /
          (((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
               7.868691311456132591e-4) * r + 0.0148753612908506148525) * r + 0.13692988092273580531) * r +
            0.59983220655588793769) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

/// Standard normal draw by inversion of one open-interval uniform.
inline double standard_normal(Rng& rng) { return standard_normal_quantile(uniform_open01(rng)); }

// ---------------------------------------------------------------------------
// Priors

/// Independent uniform prior, one (lo, hi) range per component.
class PriorSpec {
 public:
  PriorSpec() = default;
  explicit PriorSpec(std::vector<std::array<double, 2>> ranges) : ranges_(std::move(ranges)) {
    if (ranges_.empty()) {
      throw ArgumentError("prior needs at least one component");
    }
    for (std::size_t j = 0; j < ranges_.size(); ++j) {
      const auto [lo, hi] = ranges_[j];
      if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        throw ArgumentError("prior component " + std::to_string(j + 1) + ": need finite lo < hi");
      }
    }
  }

  std::size_t dim() const noexcept { return ranges_.size(); }
  const std::vector<std::array<double, 2>>& ranges() const noexcept { return ranges_; }

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;

 private:
  std::vector<std::array<double, 2>> ranges_;
};

/// One draw from `spec`; component j is lo_j + (hi_j - lo_j) U_j.
inline Vector sample_prior(const PriorSpec& spec, Rng& rng) {
  Vector theta(static_cast<Eigen::Index>(spec.dim()));
  for (std::size_t j = 0; j < spec.dim(); ++j) {
    const auto [lo, hi] = spec.ranges()[j];
    theta[static_cast<Eigen::Index>(j)] = lo + (hi - lo) * uniform_open01(rng);
  }
  return theta;
}

// ---------------------------------------------------------------------------
// g-and-k distribution

struct GkParams {
  double a = 0.0;  // location
  double b = 1.0;  // scale, > 0
  double g = 0.0;  // skewness
  double k = 0.0;  // kurtosis, > -1/2
  double c = 0.8;

  void validate() const {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(g) || !std::isfinite(k) || !std::isfinite(c)) {
      throw ArgumentError("g-and-k: non-finite parameter");
    }
    if (!(b > 0.0)) throw ArgumentError("g-and-k: B must be positive");
    if (!(k > -0.5)) throw ArgumentError("g-and-k: k must exceed -1/2");
  }
};

/// F^{-1}(x) = A + B (1 + c (1 - e^{-g z}) / (1 + e^{-g z})) (1 + z^2)^k z, z = z(x).
inline double gk_quantile(double x, const GkParams& p) {
  p.validate();
  const double z = standard_normal_quantile(x);
  // (1 - e^{-gz}) / (1 + e^{-gz}) == tanh(gz / 2), which stays finite for large |gz|.
  const double skew = 1.0 + p.c * std::tanh(0.5 * p.g * z);
  return p.a + p.b * skew * std::pow(1.0 + z * z, p.k) * z;
}

inline Dataset simulate_gk(const GkParams& p, std::size_t n, Rng& rng) {
  p.validate();
  if (n < 1) throw ArgumentError("simulate_gk: n must be at least 1");
  Dataset out(n);
  for (auto& v : out) {
    v = gk_quantile(uniform_open01(rng), p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ricker map

struct RickerParams {
  double log_r = 3.8;
  double sigma_e = 0.3;  // process noise s.d.
  double phi = 10.0;     // observation scale

  void validate() const {
    if (!std::isfinite(log_r) || !std::isfinite(sigma_e) || !std::isfinite(phi)) {
      throw ArgumentError("ricker: non-finite parameter");
    }
    if (sigma_e < 0.0) throw ArgumentError("ricker: sigma_e must be non-negative");
    if (phi < 0.0) throw ArgumentError("ricker: phi must be non-negative");
  }
};

struct RickerConfig {
  std::size_t steps = 100;
  std::size_t burn_in = 50;
  double initial_state = 1.0;
};

struct RickerPath {
  std::vector<double> latent;  // N_1 .. N_steps
  Dataset observed;            // y_{burn_in+1} .. y_steps
};

/// Simulates N_{t+1} = r N_t exp(-N_t + e_t), e_t ~ N(0, sigma_e^2), y_t ~ Poisson(phi N_t).
///
/// Each step draws e_t first, then y_t once t is past the burn-in. A
/// non-finite state raises SimulationFailure; nothing is clamped.
inline RickerPath simulate_ricker_path(const RickerParams& p, const RickerConfig& cfg, Rng& rng) {
  p.validate();
  if (cfg.steps <= cfg.burn_in) {
    throw ArgumentError("ricker: steps must exceed burn_in");
  }
  const double r = std::exp(p.log_r);
  RickerPath path;
  path.latent.reserve(cfg.steps);
  path.observed.reserve(cfg.steps - cfg.burn_in);
  double state = cfg.initial_state;
  for (std::size_t t = 1; t <= cfg.steps; ++t) {
    const double noise = p.sigma_e * standard_normal(rng);
    state = r * state * std::exp(-state + noise);
    if (!std::isfinite(state)) {
      throw SimulationFailure("ricker: latent state overflow at step " + std::to_string(t));
    }
    path.latent.push_back(state);
    if (t > cfg.burn_in) {
      const double rate = p.phi * state;
      double y = 0.0;
      if (rate > 0.0) {
        std::poisson_distribution<std::int64_t> poisson(rate);
        y = static_cast<double>(poisson(rng));
      }
      path.observed.push_back(y);
    }
  }
  return path;
}

inline Dataset simulate_ricker(const RickerParams& p, const RickerConfig& cfg, Rng& rng) {
  return simulate_ricker_path(p, cfg, rng).observed;
}

// ---------------------------------------------------------------------------
// Toy model

/// Monotone, mildly non-linear link of the toy model: h(theta) = theta + 0.05 theta^2.
inline double toy_link(double theta) { return theta + 0.05 * theta * theta; }

/// One summary S = h(theta) + eps, eps ~ N(0, noise_sd^2).
inline double simulate_toy(double theta, double noise_sd, Rng& rng) {
  if (!(noise_sd > 0.0)) throw ArgumentError("toy: noise_sd must be positive");
  return toy_link(theta) + noise_sd * standard_normal(rng);
}

}  // namespace locabc
