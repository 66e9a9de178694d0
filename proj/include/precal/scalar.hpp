#pragma once

#include <cmath>
#include <span>

// Scalar math shared by the plain-double evaluation path and the tape's
// forward values.  Both paths must round identically, so every formula that
// appears in templated code lives here exactly once.

namespace precal {

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  // log(1 + e^x) without overflow; for large x the linear term dominates.
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

// Forwarders so that unqualified calls in templated code resolve for plain
// doubles as well as for tape variables.
inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double tanh(double x) { return std::tanh(x); }
inline double sqrt(double x) { return std::sqrt(x); }
inline double abs(double x) { return std::fabs(x); }
inline double pow_const(double x, double p) { return std::pow(x, p); }
inline double value_of(double x) { return x; }

namespace detail {

inline double sum_values(const double* v, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += v[i];
  return acc;
}

inline double dot_values(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

inline double logsumexp_values(const double* v, std::size_t n) {
  double m = v[0];
  for (std::size_t i = 1; i < n; ++i)
    if (v[i] > m) m = v[i];
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(v[i] - m);
  return m + std::log(acc);
}

}  // namespace detail

inline double sum(std::span<const double> v) {
  return detail::sum_values(v.data(), v.size());
}

inline double mean(std::span<const double> v) {
  return detail::sum_values(v.data(), v.size()) / static_cast<double>(v.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return detail::dot_values(a.data(), b.data(), a.size());
}

inline double logsumexp(std::span<const double> v) {
  return detail::logsumexp_values(v.data(), v.size());
}

}  // namespace precal
