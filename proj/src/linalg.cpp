#include "precal/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace precal {

Matrix cholesky(const Matrix& sigma, double pivot_tol) {
  if (!sigma.is_square()) throw DimensionMismatch("cholesky: matrix must be square");
  if (!sigma.all_finite()) throw NonFiniteValue("cholesky: non-finite entry");
  if (!sigma.is_symmetric(1e-10)) throw NumericError("cholesky: matrix not symmetric");

  const std::size_t n = sigma.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double pivot = sigma(j, j);
    for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (pivot <= pivot_tol) throw NotPositiveDefinite("cholesky: pivot below tolerance");
    const double ljj = std::sqrt(pivot);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = sigma(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      l(i, j) = acc / ljj;
    }
  }
  return l;
}

namespace {

double off_diagonal_sq(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return s;
}

// Flip column signs so the largest-magnitude entry (first on ties) is
// positive.  Keeps eigenvector output deterministic across equivalent bases.
void apply_sign_convention(Matrix& v) {
  for (std::size_t j = 0; j < v.cols(); ++j) {
    std::size_t arg = 0;
    double best = std::fabs(v(0, j));
    for (std::size_t i = 1; i < v.rows(); ++i) {
      const double m = std::fabs(v(i, j));
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    if (v(arg, j) < 0.0)
      for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = -v(i, j);
  }
}

}  // namespace

EigenDecomposition sym_eigen(const Matrix& input, int max_sweeps) {
  if (!input.is_square()) throw DimensionMismatch("sym_eigen: matrix must be square");
  if (!input.all_finite()) throw NonFiniteValue("sym_eigen: non-finite entry");
  if (!input.is_symmetric(1e-10)) throw NumericError("sym_eigen: matrix not symmetric");

  const std::size_t n = input.rows();
  Matrix a = input;
  Matrix v = Matrix::identity(n);

  // Symmetrise exactly so rotations see a(i,j) == a(j,i) to the last bit.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double m = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = m;
      a(j, i) = m;
    }

  const double scale = frobenius_norm(a);
  const double stop = (scale > 0.0) ? 1e-30 * scale * scale : 0.0;

  bool converged = (n < 2) || off_diagonal_sq(a) <= stop;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Classic stable rotation: t = sign(theta) / (|theta| + sqrt(theta^2+1))
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0) ? 1.0 / (theta + std::sqrt(theta * theta + 1.0))
                                        : 1.0 / (theta - std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;

        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_diagonal_sq(a) <= stop;
  }
  if (!converged) throw NotConverged("sym_eigen: Jacobi sweeps exhausted");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  apply_sign_convention(out.vectors);
  return out;
}

Vector sample_mean(const std::vector<Vector>& samples) {
  if (samples.empty()) throw TooFewSamples("sample_mean: no samples");
  const std::size_t d = samples.front().size();
  Vector mean(d, 0.0);
  for (const Vector& s : samples) {
    if (s.size() != d) throw DimensionMismatch("sample_mean: ragged samples");
    for (std::size_t j = 0; j < d; ++j) mean[j] += s[j];
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (double& m : mean) m *= inv;
  return mean;
}

Matrix sample_covariance(const std::vector<Vector>& samples) {
  if (samples.size() < 2) throw TooFewSamples("sample_covariance: need at least 2 samples");
  const std::size_t m = samples.size();
  const std::size_t d = samples.front().size();
  for (const Vector& s : samples)
    if (s.size() != d) throw DimensionMismatch("sample_covariance: ragged samples");

  // Canonical accumulation order: lexicographic over sample content.  Makes
  // the result bit-identical under any permutation of the input rows.
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::lexicographical_compare(samples[i].begin(), samples[i].end(),
                                        samples[j].begin(), samples[j].end());
  });

  Vector mean(d, 0.0);
  for (std::size_t idx : order)
    for (std::size_t j = 0; j < d; ++j) mean[j] += samples[idx][j];
  const double inv = 1.0 / static_cast<double>(m);
  for (double& v : mean) v *= inv;

  Matrix cov(d, d);
  Vector dev(d);
  for (std::size_t idx : order) {
    for (std::size_t j = 0; j < d; ++j) dev[j] = samples[idx][j] - mean[j];
    for (std::size_t i = 0; i < d; ++i) {
      const double di = dev[i];
      for (std::size_t j = i; j < d; ++j) cov(i, j) += di * dev[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) *= inv;
      cov(j, i) = cov(i, j);
    }
  return cov;
}

Vector mvn_sample(std::span<const double> mean, const Matrix& chol_lower, RngStream& rng) {
  const std::size_t d = mean.size();
  if (chol_lower.rows() != d || chol_lower.cols() != d)
    throw DimensionMismatch("mvn_sample: mean/factor shape mismatch");
  Vector eps(d);
  for (std::size_t i = 0; i < d; ++i) eps[i] = rng.normal();
  Vector y(d);
  for (std::size_t i = 0; i < d; ++i) {
    double acc = mean[i];
    for (std::size_t j = 0; j <= i; ++j) acc += chol_lower(i, j) * eps[j];
    y[i] = acc;
  }
  return y;
}

}  // namespace precal
