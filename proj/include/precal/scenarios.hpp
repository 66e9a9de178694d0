#pragma once

#include <cstdint>
#include <vector>

#include "precal/errors.hpp"
#include "precal/linalg.hpp"
#include "precal/matrix.hpp"
#include "precal/preranks.hpp"
#include "precal/rng.hpp"

// Simulation studies: Gaussian truths with exponential covariance (on an
// integer index line or a 2-D spatial grid) against deliberately perturbed
// Gaussian forecasts.  Each perturbation targets a specific failure mode a
// calibration diagnostic may or may not detect.

namespace precal::scenarios {

struct ExpCovSpec {
  enum class Kind { kIndex, kGrid };
  Kind kind = Kind::kIndex;
  std::size_t dim = 10;   // index kind: D
  std::size_t rows = 5;   // grid kind
  std::size_t cols = 5;
  double sigma2 = 1.0;
  double length = 1.0;      // correlation range
  double axis_scale = 1.0;  // multiplies the row coordinate before distances

  std::size_t dimension() const { return kind == Kind::kIndex ? dim : rows * cols; }
};

// sigma2 * exp(-dist / length) with |i - j| on the index line and Euclidean
// distance between (col, axis_scale * row) coordinates on the grid.
Matrix build_cov(const ExpCovSpec& spec);

struct MisspecSpec {
  enum class Kind {
    kNone,
    kMeanBias,
    kVarianceScale,
    kRangeChange,
    kSpectrumScramble,
    kPcaStructure,
    kIsotropy,
    kPcAnisotropyFlip,
  };
  Kind kind = Kind::kNone;
  double delta = 0.5;       // mean_bias: forecast mean = delta * 1
  double c_var = 1.75;      // variance_scale factor
  double new_length = 0.3;  // range_change
  double gamma = 1.0;       // spectrum_scramble weight in [0,1]
  double c = 2.0;           // pca_structure distortion > 1
  double a = 2.0;           // pc_anisotropy_flip axis ratio > 1
  std::size_t k = 1;        // pca_structure / flip block size
  double alpha = 5.0;       // isotropy axis rescaling
  bool rotation = true;     // flip: conjugate by the (1,2)-plane quarter turn

  static MisspecSpec none() { return {}; }
  static MisspecSpec mean_bias(double delta);
  static MisspecSpec variance_scale(double c_var);
  static MisspecSpec range_change(double new_length);
  static MisspecSpec spectrum_scramble(double gamma);
  static MisspecSpec pca_structure(double c, std::size_t k);
  static MisspecSpec isotropy(double alpha);
  static MisspecSpec pc_anisotropy_flip(double a, std::size_t k, bool rotation = true);
};

// Keep the eigenvectors, interpolate the spectrum toward its reversal, and
// rescale to the original trace.
Matrix spectrum_scramble(const Matrix& sigma, double gamma);

// Distort the covariance inside the subspace orthogonal to the unit mean
// direction e = 1/sqrt(D): top-k eigenvalues of that block times c, bottom-k
// divided by c.  The variance along e is untouched.
Matrix pca_structure(const Matrix& sigma, double c, std::size_t k);

// Reverse the spectrum, amplify the new leading k eigenvalues by a and shrink
// the trailing k by a, renormalize to the original trace, then (optionally)
// rotate the top two principal axes into each other.
Matrix pc_anisotropy_flip(const Matrix& sigma, double a, std::size_t k, bool rotation = true);

struct ForecastLaw {
  Vector mean;
  Matrix cov;
};

// The forecast distribution implied by a perturbation of the true spec.
ForecastLaw misspecified_law(const ExpCovSpec& true_spec, const MisspecSpec& misspec);

struct SimulationConfig {
  ExpCovSpec true_spec;
  MisspecSpec misspec;
  std::size_t cases = 10000;    // forecast cases N
  std::size_t ensemble = 20;    // members per case M
  std::vector<preranks::PreRank> preranks;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  // fresh predictive draws per case for the copula CDF estimate; the ensemble
  // itself is too small (and self-comparison ties bias the rank)
  std::size_t copula_pool = 2000;
};

struct SimulationRun {
  std::size_t cases = 0;
  std::size_t ensemble = 0;
  ForecastLaw forecast;
  std::vector<preranks::PreRank> preranks;
  // pits[p] pools the hard projected PITs of preranks[p] over all cases, in
  // case order; the pooled marginal contributes D entries per case.
  std::vector<std::vector<double>> pits;
};

SimulationRun run_simulation(const SimulationConfig& config);

}  // namespace precal::scenarios
