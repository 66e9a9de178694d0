#include <cmath>
#include <random>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "precal/diagnostics.hpp"
#include "precal/linalg.hpp"
#include "precal/preranks.hpp"
#include "precal/scenarios.hpp"

using namespace precal;
using namespace precal::scenarios;

namespace {

ExpCovSpec index_spec(std::size_t d, double length = 1.0, double sigma2 = 1.0) {
  ExpCovSpec spec;
  spec.kind = ExpCovSpec::Kind::kIndex;
  spec.dim = d;
  spec.sigma2 = sigma2;
  spec.length = length;
  return spec;
}

ExpCovSpec grid_spec(std::size_t rows, std::size_t cols, double length = 1.0,
                     double axis_scale = 1.0) {
  ExpCovSpec spec;
  spec.kind = ExpCovSpec::Kind::kGrid;
  spec.rows = rows;
  spec.cols = cols;
  spec.length = length;
  spec.axis_scale = axis_scale;
  return spec;
}

Vector sorted_eigenvalues(const Matrix& sigma) { return sym_eigen(sigma).values; }

double mean_direction_variance(const Matrix& sigma) {
  const std::size_t d = sigma.rows();
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) acc += sigma(i, j);
  return acc / static_cast<double>(d);
}

}  // namespace

TEST_CASE("exponential covariance on the index line") {
  const Matrix sigma = build_cov(index_spec(10));
  CHECK(sigma(1, 2) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  CHECK(sigma(0, 9) == doctest::Approx(std::exp(-9.0)).epsilon(1e-15));
  for (std::size_t i = 0; i < 10; ++i) CHECK(sigma(i, i) == 1.0);

  const Matrix scaled = build_cov(index_spec(4, 2.0, 2.5));
  for (std::size_t i = 0; i < 4; ++i) CHECK(scaled(i, i) == 2.5);
  CHECK(scaled(0, 1) == doctest::Approx(2.5 * std::exp(-0.5)).epsilon(1e-15));

  CHECK_NOTHROW(cholesky(sigma));
  ExpCovSpec bad = index_spec(4);
  bad.sigma2 = 0.0;
  CHECK_THROWS_AS(build_cov(bad), ConfigError);
  bad = index_spec(4);
  bad.length = -1.0;
  CHECK_THROWS_AS(build_cov(bad), ConfigError);
}

TEST_CASE("exponential covariance on a spatial grid") {
  const Matrix sigma = build_cov(grid_spec(5, 5));
  // grid point (row r, col c) has flat index 5r + c; (0,0) vs (row 4, col 3)
  // lie a 3-4-5 triangle apart
  CHECK(sigma(0, 4 * 5 + 3) == doctest::Approx(std::exp(-5.0)).epsilon(1e-12));
  for (std::size_t i = 0; i < 25; ++i) CHECK(sigma(i, i) == 1.0);
  // one step along a row is distance 1, one step down a column too
  CHECK(sigma(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(sigma(0, 5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK_NOTHROW(cholesky(sigma));

  const Matrix stretched = build_cov(grid_spec(5, 5, 1.0, 2.0));
  CHECK(stretched(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));  // along the row
  CHECK(stretched(0, 5) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));  // down the column
  CHECK_NOTHROW(cholesky(stretched));
  CHECK_NOTHROW(cholesky(build_cov(grid_spec(5, 5, 1.0, 5.0))));
}

TEST_CASE("spectrum scramble reverses eigenvalues and keeps eigenvectors") {
  Matrix diag21(2, 2);
  diag21(0, 0) = 2.0;
  diag21(1, 1) = 1.0;
  const Matrix reversed = spectrum_scramble(diag21, 1.0);
  CHECK(reversed(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(reversed(1, 1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(reversed(0, 1) == doctest::Approx(0.0).epsilon(1e-12));

  Matrix diag31(2, 2);
  diag31(0, 0) = 3.0;
  diag31(1, 1) = 1.0;
  const Matrix half = spectrum_scramble(diag31, 0.5);
  CHECK(half(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(half(1, 1) == doctest::Approx(2.0).epsilon(1e-12));

  const Matrix id = spectrum_scramble(Matrix::identity(3), 0.7);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(id(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));

  std::mt19937 gen(77);
  const Matrix sigma = oracle::random_spd(6, gen);
  const Matrix untouched = spectrum_scramble(sigma, 0.0);
  CHECK(frobenius_distance(untouched, sigma) < 1e-12 * frobenius_norm(sigma));

  const Matrix scrambled = spectrum_scramble(sigma, 1.0);
  CHECK(std::abs(trace(scrambled) - trace(sigma)) < 1e-10);
  const EigenDecomposition before = sym_eigen(sigma);
  const EigenDecomposition after = sym_eigen(scrambled);
  // the eigenvalue multiset is unchanged (full reversal permutes it), but
  // each value now sits on the opposite end's eigenvector, up to sign
  for (std::size_t col = 0; col < 6; ++col) {
    CHECK(after.values[col] == doctest::Approx(before.values[col]).epsilon(1e-8));
    double dot_abs = 0.0;
    for (std::size_t i = 0; i < 6; ++i)
      dot_abs += after.vectors(i, col) * before.vectors(i, 5 - col);
    CHECK(std::abs(std::abs(dot_abs) - 1.0) < 1e-8);
  }

  CHECK_THROWS_AS(spectrum_scramble(sigma, -0.1), ConfigError);
  CHECK_THROWS_AS(spectrum_scramble(sigma, 1.1), ConfigError);
}

TEST_CASE("PCA-structure distortion spares the mean direction") {
  const Matrix distorted = pca_structure(Matrix::identity(3), 2.0, 1);
  const Vector values = sorted_eigenvalues(distorted);
  CHECK(values[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(values[1] == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(values[2] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(mean_direction_variance(distorted) == doctest::Approx(1.0).epsilon(1e-10));

  // the no-distortion limit returns the input
  std::mt19937 gen(13);
  const Matrix sigma = oracle::random_spd(6, gen);
  const Matrix limit = pca_structure(sigma, 1.0 + 1e-12, 2);
  CHECK(frobenius_distance(limit, sigma) < 1e-10 * frobenius_norm(sigma));

  const Matrix out = pca_structure(sigma, 2.0, 2);
  CHECK(mean_direction_variance(out) ==
        doctest::Approx(mean_direction_variance(sigma)).epsilon(1e-10));
  CHECK_NOTHROW(cholesky(out));
  CHECK(frobenius_distance(out, sigma) > 1e-3);

  // identity(6), c=2, k=2: block eigenvalues {2,2,1,0.5,0.5} plus 1 along e
  const Vector id_values = sorted_eigenvalues(pca_structure(Matrix::identity(6), 2.0, 2));
  const Vector expected = {2.0, 2.0, 1.0, 1.0, 0.5, 0.5};
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(id_values[i] == doctest::Approx(expected[i]).epsilon(1e-10));

  CHECK_THROWS_AS(pca_structure(Matrix::identity(2), 2.0, 1), DimensionTooSmall);
  CHECK_THROWS_AS(pca_structure(Matrix::identity(4), 2.0, 2), IndexOverlap);
  CHECK_NOTHROW(pca_structure(Matrix::identity(5), 2.0, 2));
  CHECK_THROWS_AS(pca_structure(sigma, 0.5, 1), ConfigError);
  CHECK_THROWS_AS(pca_structure(sigma, 2.0, 0), ConfigError);
}

TEST_CASE("PC anisotropy flip sends variance to reversed, rotated axes") {
  const Matrix flipped = pc_anisotropy_flip(Matrix::identity(2), 2.0, 1);
  CHECK(flipped(0, 0) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(flipped(1, 1) == doctest::Approx(1.6).epsilon(1e-12));
  CHECK(flipped(0, 1) == doctest::Approx(0.0).epsilon(1e-12));

  // diag(5,4,3,2,1), a=2, k=2: reversed spectrum (1,2,3,4,5) becomes
  // (2,4,3,2,2.5), renormalized by 15/13.5, then the quarter turn swaps the
  // first two principal axes
  Matrix steps(5, 5);
  for (std::size_t i = 0; i < 5; ++i) steps(i, i) = 5.0 - static_cast<double>(i);
  const Matrix out = pc_anisotropy_flip(steps, 2.0, 2);
  const double f = 15.0 / 13.5;
  const Vector expected_diag = {4.0 * f, 2.0 * f, 3.0 * f, 2.0 * f, 2.5 * f};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(out(i, i) == doctest::Approx(expected_diag[i]).epsilon(1e-12));
    for (std::size_t j = i + 1; j < 5; ++j)
      CHECK(out(i, j) == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK(std::abs(trace(out) - trace(steps)) < 1e-10);

  std::mt19937 gen(5);
  const Matrix sigma = oracle::random_spd(6, gen);
  for (std::size_t k : {std::size_t{1}, std::size_t{3}}) {
    const Matrix result = pc_anisotropy_flip(sigma, 2.0, k);
    CHECK(std::abs(trace(result) - trace(sigma)) < 1e-10);
    CHECK_NOTHROW(cholesky(result));
  }

  // with a -> 1 and no rotation this is exactly the full spectrum reversal
  const Matrix reduced = pc_anisotropy_flip(sigma, 1.0, 1, false);
  const Matrix scrambled = spectrum_scramble(sigma, 1.0);
  CHECK(frobenius_distance(reduced, scrambled) < 1e-10 * frobenius_norm(sigma));

  CHECK_THROWS_AS(pc_anisotropy_flip(Matrix::identity(1), 2.0, 1), DimensionTooSmall);
  CHECK_THROWS_AS(pc_anisotropy_flip(Matrix::identity(4), 2.0, 3), DimensionTooSmall);
  CHECK_THROWS_AS(pc_anisotropy_flip(sigma, 0.9, 1), ConfigError);
}

TEST_CASE("misspecified forecast laws") {
  const ExpCovSpec spec = index_spec(5);
  const Matrix truth = build_cov(spec);

  const ForecastLaw biased = misspecified_law(spec, MisspecSpec::mean_bias(0.5));
  for (double m : biased.mean) CHECK(m == 0.5);
  CHECK(frobenius_distance(biased.cov, truth) == 0.0);

  const ForecastLaw inflated = misspecified_law(spec, MisspecSpec::variance_scale(1.75));
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(inflated.cov(i, j) == doctest::Approx(1.75 * truth(i, j)).epsilon(1e-15));
  for (double m : inflated.mean) CHECK(m == 0.0);

  const ForecastLaw shortened = misspecified_law(spec, MisspecSpec::range_change(0.3));
  ExpCovSpec short_spec = spec;
  short_spec.length = 0.3;
  CHECK(frobenius_distance(shortened.cov, build_cov(short_spec)) == 0.0);

  CHECK_THROWS_AS(misspecified_law(spec, MisspecSpec::isotropy(5.0)), ConfigError);
  const ExpCovSpec grid = grid_spec(3, 3);
  const ForecastLaw aniso = misspecified_law(grid, MisspecSpec::isotropy(5.0));
  ExpCovSpec scaled = grid;
  scaled.axis_scale = 5.0;
  CHECK(frobenius_distance(aniso.cov, build_cov(scaled)) == 0.0);
}

TEST_CASE("simulation produces hard PITs on the ensemble atom grid") {
  SimulationConfig config;
  config.true_spec = index_spec(4);
  config.cases = 100;
  config.ensemble = 10;
  config.seed = 2024;
  config.copula_pool = 200;
  for (const char* name : {"loc", "scale", "dep:1", "marg", "marg:2", "hdr", "copula", "pca:1"})
    config.preranks.push_back(preranks::PreRank::parse(name));

  const SimulationRun run = run_simulation(config);
  REQUIRE(run.pits.size() == 8);
  for (std::size_t p = 0; p < run.pits.size(); ++p) {
    const std::size_t expect =
        run.preranks[p] == preranks::PreRank::parse("marg") ? 100 * 4 : 100;
    CHECK(run.pits[p].size() == expect);
    for (double pit : run.pits[p]) {
      CHECK(pit >= 0.0);
      CHECK(pit <= 1.0);
      CHECK(std::abs(pit * 10.0 - std::round(pit * 10.0)) < 1e-9);
    }
  }
}

TEST_CASE("simulation is reproducible and thread-count invariant") {
  SimulationConfig config;
  config.true_spec = index_spec(4);
  config.misspec = MisspecSpec::mean_bias(0.5);
  config.cases = 60;
  config.ensemble = 8;
  config.seed = 7;
  config.copula_pool = 100;
  for (const char* name : {"loc", "copula", "pca:1"})
    config.preranks.push_back(preranks::PreRank::parse(name));

  const SimulationRun a = run_simulation(config);
  const SimulationRun b = run_simulation(config);
  SimulationConfig threaded = config;
  threaded.threads = 3;
  const SimulationRun c = run_simulation(threaded);
  for (std::size_t p = 0; p < a.pits.size(); ++p) {
    CHECK(a.pits[p] == b.pits[p]);
    CHECK(a.pits[p] == c.pits[p]);
  }

  SimulationConfig reseeded = config;
  reseeded.seed = 8;
  const SimulationRun d = run_simulation(reseeded);
  CHECK(a.pits[0] != d.pits[0]);

  // dropping the copula pre-rank must not disturb the other projections:
  // the pool is drawn from a derived stream, not the case stream
  SimulationConfig no_copula = config;
  no_copula.preranks = {preranks::PreRank::parse("loc"), preranks::PreRank::parse("pca:1")};
  const SimulationRun e = run_simulation(no_copula);
  CHECK(e.pits[0] == a.pits[0]);
  CHECK(e.pits[1] == a.pits[2]);
}

TEST_CASE("simulation PCA projection equals the pointwise pre-rank") {
  RngStream rng(3, 3);
  preranks::SampleSet ensemble;
  for (int m = 0; m < 8; ++m) {
    Vector v(3);
    for (double& x : v) x = rng.normal();
    ensemble.push_back(v);
  }
  Vector y = {0.4, -1.1, 0.6};
  const Matrix cov = sample_covariance(ensemble);
  const EigenDecomposition eig = sym_eigen(cov);
  double acc = 0.0;
  for (std::size_t i = 0; i < 3; ++i) acc += eig.vectors(i, 0) * y[i];
  CHECK(preranks::pca(y, ensemble, 1).value == acc);
}

TEST_CASE("mean bias shifts the location PIT mass left") {
  SimulationConfig config;
  config.true_spec = index_spec(4);
  config.misspec = MisspecSpec::mean_bias(0.5);
  config.cases = 2000;
  config.ensemble = 20;
  config.seed = 11;
  config.preranks = {preranks::PreRank::parse("loc")};
  const SimulationRun run = run_simulation(config);
  double mean_pit = 0.0;
  for (double pit : run.pits[0]) mean_pit += pit / static_cast<double>(run.pits[0].size());
  CHECK(mean_pit < 0.4);
}

TEST_CASE("variance inflation concentrates the location PIT centrally") {
  SimulationConfig config;
  config.true_spec = index_spec(4);
  config.misspec = MisspecSpec::variance_scale(1.75);
  config.cases = 2000;
  config.ensemble = 20;
  config.seed = 12;
  config.preranks = {preranks::PreRank::parse("loc")};
  const SimulationRun run = run_simulation(config);
  const double at_half = diagnostics::empirical_cdf(run.pits[0], 0.5);
  const double three_se = 3.0 * 0.5 / std::sqrt(2000.0);
  CHECK(at_half > 0.5 + three_se);
}

TEST_CASE("well-specified forecasts pass the null gate for every pre-rank") {
  SimulationConfig config;
  config.true_spec = index_spec(4);
  config.cases = 2000;
  config.ensemble = 20;
  config.seed = 33;
  config.copula_pool = 1000;
  for (const char* name : {"loc", "scale", "dep:1", "marg", "hdr", "copula", "pca:1"})
    config.preranks.push_back(preranks::PreRank::parse(name));
  const SimulationRun run = run_simulation(config);

  const Vector grid = diagnostics::quantile_grid(100);
  const auto null_small =
      diagnostics::null_distribution(2000, grid, 2000, config.ensemble, 909);
  const auto null_pooled =
      diagnostics::null_distribution(2000 * 4, grid, 2000, config.ensemble, 909);
  for (std::size_t p = 0; p < run.pits.size(); ++p) {
    const bool pooled = run.preranks[p] == preranks::PreRank::parse("marg");
    const double gate = (pooled ? null_pooled : null_small).quantile(0.99);
    CHECK(diagnostics::pce(run.pits[p], grid) < gate);
  }
}

TEST_CASE("simulation configuration errors") {
  SimulationConfig config;
  config.true_spec = index_spec(4);
  config.preranks = {preranks::PreRank::parse("loc")};
  config.cases = 0;
  CHECK_THROWS_AS(run_simulation(config), ConfigError);
  config.cases = 10;
  config.ensemble = 1;
  CHECK_THROWS_AS(run_simulation(config), ConfigError);
  config.ensemble = 8;
  config.preranks.clear();
  CHECK_THROWS_AS(run_simulation(config), ConfigError);
  config.preranks = {preranks::PreRank::parse("dep:4")};
  CHECK_THROWS_AS(run_simulation(config), ConfigError);
  config.preranks = {preranks::PreRank::parse("marg:5")};
  CHECK_THROWS_AS(run_simulation(config), ConfigError);
  config.preranks = {preranks::PreRank::parse("pca:5")};
  CHECK_THROWS_AS(run_simulation(config), ConfigError);
}
