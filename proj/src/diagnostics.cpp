#include "precal/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "precal/parallel.hpp"

namespace precal::diagnostics {

double projected_pit_hard(double t, std::span<const double> prerank_samples) {
  if (prerank_samples.empty()) throw NoSamples("projected_pit: empty ensemble");
  std::size_t count = 0;
  for (double m : prerank_samples) count += (m <= t);
  return static_cast<double>(count) / static_cast<double>(prerank_samples.size());
}

double projected_pit_smooth(double t, std::span<const double> prerank_samples, double tau) {
  return projected_pit_smooth_of<double, double>(t, prerank_samples, tau);
}

double projected_pit_randomized(double t, std::span<const double> prerank_samples,
                                RngStream& rng) {
  if (prerank_samples.empty()) throw NoSamples("projected_pit: empty ensemble");
  std::size_t below = 0, ties = 0;
  for (double m : prerank_samples) {
    below += (m < t);
    ties += (m == t);
  }
  const double v = rng.uniform();
  return (static_cast<double>(below) + v * (1.0 + static_cast<double>(ties))) /
         (static_cast<double>(prerank_samples.size()) + 1.0);
}

Vector quantile_grid(std::size_t m) {
  if (m == 0) throw ConfigError("quantile_grid: need at least one level");
  Vector grid(m);
  for (std::size_t j = 1; j <= m; ++j)
    grid[j - 1] = static_cast<double>(j) / static_cast<double>(m + 1);
  return grid;
}

double empirical_cdf(std::span<const double> sample, double alpha) {
  if (sample.empty()) throw EmptySampleSet("empirical_cdf: empty sample");
  std::size_t count = 0;
  for (double z : sample) count += (z <= alpha);
  return static_cast<double>(count) / static_cast<double>(sample.size());
}

namespace {

// Shared accumulation so every PCE path rounds identically: mean over the
// grid, in grid order, of |alpha - count(alpha)/n|.
template <class CountFn>
double pce_from_counts(std::span<const double> grid, std::size_t n, CountFn&& count) {
  double acc = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double alpha : grid)
    acc += std::fabs(alpha - static_cast<double>(count(alpha)) * inv_n);
  return acc / static_cast<double>(grid.size());
}

}  // namespace

double pce(std::span<const double> pits, std::span<const double> grid) {
  if (pits.empty()) throw EmptySampleSet("pce: empty PIT sample");
  if (grid.empty()) throw ConfigError("pce: empty grid");
  Vector sorted(pits.begin(), pits.end());
  std::sort(sorted.begin(), sorted.end());
  return pce_from_counts(grid, sorted.size(), [&](double alpha) {
    return static_cast<std::size_t>(
        std::upper_bound(sorted.begin(), sorted.end(), alpha) - sorted.begin());
  });
}

double smoothed_cdf(std::span<const double> pits, double alpha, double tau) {
  return smoothed_cdf_of<double>(pits, alpha, tau);
}

double pce_kde(std::span<const double> pits, std::span<const double> grid, double tau,
               double p) {
  return pce_kde_of<double>(pits, grid, tau, p);
}

double energy_score(const std::vector<Vector>& ensemble, std::span<const double> y) {
  if (ensemble.empty()) throw NoSamples("energy_score: empty ensemble");
  const std::size_t g = ensemble.size();
  const std::size_t dim = y.size();
  auto distance = [dim](std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = a[d] - b[d];
      acc += diff * diff;
    }
    return std::sqrt(acc);
  };
  double to_obs = 0.0;
  for (const Vector& x : ensemble) {
    if (x.size() != dim) throw DimensionMismatch("energy_score: member dimension mismatch");
    to_obs += distance(x, y);
  }
  double spread = 0.0;
  for (std::size_t i = 0; i < g; ++i)
    for (std::size_t j = 0; j < g; ++j) spread += distance(ensemble[i], ensemble[j]);
  const double gd = static_cast<double>(g);
  return to_obs / gd - spread / (2.0 * gd * gd);
}

double NullDistribution::quantile(double level) const {
  if (statistics.empty()) throw EmptySampleSet("null quantile: no statistics");
  const double b = static_cast<double>(statistics.size());
  // smallest k with k/B >= level; the 1e-9 guards against 0.95*B landing an
  // ulp above the integer it should be
  double k = std::ceil(level * b - 1e-9);
  if (k < 1.0) k = 1.0;
  if (k > b) k = b;
  return statistics[static_cast<std::size_t>(k) - 1];
}

NullDistribution null_distribution(std::size_t n, std::span<const double> grid, std::size_t B,
                                   std::optional<std::size_t> discretization, std::uint64_t seed,
                                   std::uint64_t stream_salt, int threads) {
  if (n == 0 || B == 0) throw ConfigError("null_distribution: n and B must be positive");
  if (discretization && *discretization == 0)
    throw ConfigError("null_distribution: discretization must be positive");

  NullDistribution null;
  null.statistics.assign(B, 0.0);

  if (discretization) {
    // Hard PITs of an M-member ensemble live on {0, 1/M, ..., 1}; draw the
    // atom index directly and accumulate counts instead of sorting.  The
    // result is bit-identical to the generic path because the per-level
    // counts are the same integers.
    const std::size_t m = *discretization;
    Vector atoms(m + 1);
    for (std::size_t j = 0; j <= m; ++j)
      atoms[j] = static_cast<double>(j) / static_cast<double>(m);
    parallel_for(B, threads, [&](std::size_t b) {
      RngStream rng(seed, mix_stream({0x6e756c6cULL, stream_salt, b}));
      std::vector<std::size_t> counts(m + 1, 0);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t atom =
            static_cast<std::size_t>(rng.uniform() * static_cast<double>(m + 1));
        ++counts[atom < m + 1 ? atom : m];
      }
      std::vector<std::size_t> prefix(m + 1, 0);
      std::size_t running = 0;
      for (std::size_t j = 0; j <= m; ++j) {
        running += counts[j];
        prefix[j] = running;
      }
      null.statistics[b] = pce_from_counts(grid, n, [&](double alpha) -> std::size_t {
        // last atom <= alpha
        const auto it = std::upper_bound(atoms.begin(), atoms.end(), alpha);
        if (it == atoms.begin()) return 0;
        return prefix[static_cast<std::size_t>(it - atoms.begin()) - 1];
      });
    });
  } else {
    parallel_for(B, threads, [&](std::size_t b) {
      RngStream rng(seed, mix_stream({0x6e756c6cULL, stream_salt, b}));
      Vector pits(n);
      for (double& z : pits) z = rng.uniform();
      null.statistics[b] = pce(pits, grid);
    });
  }

  std::sort(null.statistics.begin(), null.statistics.end());
  return null;
}

std::vector<ReliabilityPoint> reliability_curve(std::span<const double> pits,
                                                std::span<const double> grid) {
  std::vector<ReliabilityPoint> curve;
  curve.reserve(grid.size());
  for (double alpha : grid) curve.push_back({alpha, empirical_cdf(pits, alpha)});
  return curve;
}

}  // namespace precal::diagnostics
