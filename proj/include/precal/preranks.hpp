#pragma once

#include <functional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "precal/errors.hpp"
#include "precal/linalg.hpp"
#include "precal/tape.hpp"

// Pre-rank projections: scalar summaries rho(y) of a multivariate outcome
// whose projected rank against an ensemble yields a univariate PIT.  The
// formula cores are templated over the scalar type so the training loop can
// evaluate them on tape variables with bit-identical forward values.

namespace precal::preranks {

template <class A, class B>
using promoted_t =
    std::conditional_t<std::is_same_v<A, double> && std::is_same_v<B, double>, double, Var>;

// Mean across coordinates.
template <class S>
S location_of(std::span<const S> y) {
  if (y.empty()) throw DegenerateVector("location: empty vector");
  return mean(y);
}

// Population variance across coordinates.
template <class S>
S scale_of(std::span<const S> y) {
  if (y.empty()) throw DegenerateVector("scale: empty vector");
  const S m = mean(y);
  std::vector<S> dev;
  dev.reserve(y.size());
  for (const S& v : y) dev.push_back(v - m);
  return dot(std::span<const S>(dev), std::span<const S>(dev)) /
         static_cast<double>(y.size());
}

// Negated lag-h variogram-to-variance ratio: -gamma(h) / s^2 with
// gamma(h) = (1 / (2 (D - h))) sum_d (y_d - y_{d+h})^2.
template <class S>
S dependency_of(std::span<const S> y, std::size_t h) {
  const std::size_t d = y.size();
  if (h < 1 || h >= d) throw IndexOutOfRange("dependency: lag must satisfy 1 <= h <= D-1");
  bool constant = true;
  for (std::size_t i = 1; i < d && constant; ++i)
    constant = (value_of(y[i]) == value_of(y[0]));
  if (constant) throw DegenerateVector("dependency: constant vector");

  std::vector<S> diff;
  diff.reserve(d - h);
  for (std::size_t i = 0; i + h < d; ++i) diff.push_back(y[i] - y[i + h]);
  const S gamma = dot(std::span<const S>(diff), std::span<const S>(diff)) /
                  (2.0 * static_cast<double>(d - h));
  const S variance = scale_of(y);
  return -(gamma / variance);
}

// Smoothed Monte Carlo CDF: (1/S) sum_s prod_d sigmoid(tau (y_d - pool_sd)).
// The point and the pool may carry different scalar types (observation vs
// tape-valued samples).
template <class P, class E>
promoted_t<P, E> copula_smooth_of(std::span<const P> point,
                                  const std::vector<std::vector<E>>& pool, double tau) {
  if (pool.empty()) throw NoSamples("copula: empty sample pool");
  using R = promoted_t<P, E>;
  std::vector<R> terms;
  terms.reserve(pool.size());
  for (const auto& s : pool) {
    if (s.size() != point.size()) throw DimensionMismatch("copula: pool dimension mismatch");
    R prod = sigmoid(tau * (point[0] - s[0]));
    for (std::size_t d = 1; d < point.size(); ++d)
      prod = prod * sigmoid(tau * (point[d] - s[d]));
    terms.push_back(prod);
  }
  return mean(std::span<const R>(terms));
}

// ---- plain-double evaluation interface -------------------------------------

using DensityFn = std::function<double(std::span<const double>)>;
using SampleSet = std::vector<Vector>;

inline double marginal(std::span<const double> y, std::size_t d) {
  if (d < 1 || d > y.size()) throw IndexOutOfRange("marginal: index out of range");
  return y[d - 1];
}

inline double location(std::span<const double> y) { return location_of<double>(y); }
inline double scale(std::span<const double> y) { return scale_of<double>(y); }
inline double dependency(std::span<const double> y, std::size_t h) {
  return dependency_of<double>(y, h);
}

double hdr(const DensityFn& density, std::span<const double> y);

// Hard Monte Carlo CDF: fraction of pool points coordinatewise <= y.
double copula_hard(std::span<const double> y, const SampleSet& pool);
double copula_smooth(std::span<const double> y, const SampleSet& pool, double tau);

struct PcaResult {
  double value = 0.0;
  // Set when the gap between the selected eigenvalue and the next one is
  // below 1e-10; the projection direction is then arbitrary within a plane.
  bool degenerate_spectrum = false;
};

// Projection onto the k-th principal axis (1-based, descending eigenvalues)
// of the sample covariance of `samples`.
PcaResult pca(std::span<const double> y, const SampleSet& samples, std::size_t k);

// ---- descriptor ------------------------------------------------------------

enum class Kind { kMarginal, kLocation, kScale, kDependency, kHdr, kCopula, kPca };

struct PreRank {
  Kind kind = Kind::kLocation;
  // d for marginal (0 means "all coordinates, pooled"), h for dependency,
  // k for pca; unused otherwise.
  std::size_t index = 0;

  // Exact config strings: marg[:d], loc, scale, dep:h, hdr, copula, pca:k.
  static PreRank parse(const std::string& text);
  std::string name() const;

  // Whether gradients flow through the projection itself during training.
  // The PCA axis is held fixed (no derivative through the eigendecomposition)
  // and the hard copula indicator has zero gradient; its smooth variant is
  // differentiable.
  bool differentiable(bool smooth_copula) const {
    if (kind == Kind::kPca) return false;
    if (kind == Kind::kCopula) return smooth_copula;
    return true;
  }

  bool operator==(const PreRank& other) const = default;
};

struct PreRankContext {
  DensityFn density;                  // hdr
  const SampleSet* samples = nullptr; // copula pool and pca ensemble
  double tau_cop = 100.0;
  bool smooth_copula = false;
};

// Evaluate a pointwise pre-rank.  The pooled marginal ("marg" with index 0)
// is an aggregation rule, not a pointwise projection; callers expand it to
// one marginal per coordinate before getting here.
double evaluate(const PreRank& prerank, std::span<const double> y, const PreRankContext& ctx);

}  // namespace precal::preranks
