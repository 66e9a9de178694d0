#pragma once

#include <span>
#include <vector>

#include "precal/matrix.hpp"
#include "precal/rng.hpp"

namespace precal {

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // orthonormal columns, vectors.col(j) pairs with values[j]
};

// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
// Throws NotPositiveDefinite when a pivot falls at or below `pivot_tol`.
Matrix cholesky(const Matrix& sigma, double pivot_tol = 1e-12);

// Full eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
// Eigenvalues are sorted descending; each eigenvector is normalised so that
// its largest-magnitude entry (first such entry on ties) is positive.
// Throws NotConverged if the off-diagonal mass has not vanished after
// `max_sweeps` sweeps.
EigenDecomposition sym_eigen(const Matrix& a, int max_sweeps = 100);

// Population covariance (divide by M, not M-1) of row vectors.  Summation
// runs over a canonical ordering of the samples (lexicographic), so the
// result is exactly invariant to input permutation.
Matrix sample_covariance(const std::vector<Vector>& samples);

// Mean over rows, accumulated in index order.
Vector sample_mean(const std::vector<Vector>& samples);

// Draw mean + L * eps with eps standard normal from `rng`.
Vector mvn_sample(std::span<const double> mean, const Matrix& chol_lower, RngStream& rng);

}  // namespace precal
