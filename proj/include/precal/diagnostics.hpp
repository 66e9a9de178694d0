#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "precal/errors.hpp"
#include "precal/matrix.hpp"
#include "precal/rng.hpp"
#include "precal/tape.hpp"

namespace precal::diagnostics {

// ---- projected PITs ---------------------------------------------------------
//
// Given the pre-rank of the observation t and of the M ensemble members, the
// projected PIT is the (possibly smoothed or randomized) rank of t.

// (1/M) #{ T_m <= t }  -- inclusive comparison.
double projected_pit_hard(double t, std::span<const double> prerank_samples);

// (1/M) sum_m sigmoid(tau (t - T_m)); the differentiable surrogate used at
// training time.  The templated core is shared with the tape path: the
// observation pre-rank and the member pre-ranks may carry different scalar
// types.
template <class T, class S>
auto projected_pit_smooth_of(const T& t, std::span<const S> prerank_samples, double tau) {
  if (prerank_samples.empty()) throw NoSamples("projected_pit: empty ensemble");
  using R = decltype(sigmoid(tau * (t - prerank_samples[0])));
  std::vector<R> terms;
  terms.reserve(prerank_samples.size());
  for (const S& m : prerank_samples) terms.push_back(sigmoid(tau * (t - m)));
  return mean(std::span<const R>(terms));
}

double projected_pit_smooth(double t, std::span<const double> prerank_samples, double tau);

// (#{T_m < t} + V (1 + #{T_m = t})) / (M + 1) with V ~ U[0,1); exactly
// uniform for exchangeable tuples even under ties.
double projected_pit_randomized(double t, std::span<const double> prerank_samples,
                                RngStream& rng);

// ---- calibration error ------------------------------------------------------

// Levels j/(m+1), j = 1..m.
Vector quantile_grid(std::size_t m = 100);

// (1/n) #{ z_i <= alpha }.
double empirical_cdf(std::span<const double> sample, double alpha);

// Mean absolute deviation between the nominal level and the empirical PIT
// CDF over the grid.
double pce(std::span<const double> pits, std::span<const double> grid);

// Sigmoid-kernel CDF estimate and the differentiable calibration error built
// from it.
template <class S>
S smoothed_cdf_of(std::span<const S> pits, double alpha, double tau) {
  if (pits.empty()) throw EmptySampleSet("smoothed_cdf: empty sample");
  std::vector<S> terms;
  terms.reserve(pits.size());
  for (const S& z : pits) terms.push_back(sigmoid(tau * (alpha - z)));
  return mean(std::span<const S>(terms));
}

template <class S>
S pce_kde_of(std::span<const S> pits, std::span<const double> grid, double tau, double p) {
  if (grid.empty()) throw ConfigError("pce_kde: empty grid");
  std::vector<S> terms;
  terms.reserve(grid.size());
  for (double alpha : grid) {
    const S dev = abs(alpha - smoothed_cdf_of(pits, alpha, tau));
    terms.push_back(p == 1.0 ? dev : pow_const(dev, p));
  }
  return mean(std::span<const S>(terms));
}

double smoothed_cdf(std::span<const double> pits, double alpha, double tau);
double pce_kde(std::span<const double> pits, std::span<const double> grid, double tau = 100.0,
               double p = 1.0);

// ---- scores ------------------------------------------------------------------

// (1/G) sum_i ||x_i - y|| - 1/(2 G^2) sum_i sum_j ||x_i - x_j||.
double energy_score(const std::vector<Vector>& ensemble, std::span<const double> y);

// ---- null distribution --------------------------------------------------------

struct NullDistribution {
  std::vector<double> statistics;  // sorted ascending

  // Smallest order statistic with rank/B >= level.
  double quantile(double level) const;
};

// Monte Carlo null of the PCE statistic for a calibrated forecaster: B
// replicates of n i.i.d. uniform PITs (discrete uniform on {0, 1/M, ..., 1}
// when discretization M is given, matching hard PITs of an M-ensemble).
NullDistribution null_distribution(std::size_t n, std::span<const double> grid, std::size_t B,
                                   std::optional<std::size_t> discretization, std::uint64_t seed,
                                   std::uint64_t stream_salt = 0, int threads = 1);

// ---- report -------------------------------------------------------------------

struct ReliabilityPoint {
  double alpha;
  double cdf;
};

std::vector<ReliabilityPoint> reliability_curve(std::span<const double> pits,
                                                std::span<const double> grid);

struct PreRankReport {
  std::string prerank;
  double pce = 0.0;
  double null_q95 = 0.0;
  double null_q99 = 0.0;
  bool pass = false;  // pce <= null_q95
  std::vector<ReliabilityPoint> reliability;
  Vector pits;  // dumped as single-column CSV on request, not into JSON
};

struct CalibrationReport {
  std::vector<PreRankReport> entries;
  double nll = 0.0;
  double energy_score = 0.0;
};

}  // namespace precal::diagnostics
