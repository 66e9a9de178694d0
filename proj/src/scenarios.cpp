#include "precal/scenarios.hpp"

#include <cmath>
#include <cstdint>

#include "precal/diagnostics.hpp"
#include "precal/model.hpp"
#include "precal/parallel.hpp"

namespace precal::scenarios {

namespace {

constexpr std::uint64_t kCaseStreamTag = 0x7363656e6172696f;  // per-case draws
constexpr std::uint64_t kCopulaPoolSalt = 0x706f6f6c;         // pool substream

// U diag(lambda) U^T with exact symmetry.
Matrix from_spectrum(const Matrix& basis, std::span<const double> lambda) {
  const std::size_t d = basis.rows();
  Matrix out(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t m = 0; m < d; ++m) acc += lambda[m] * basis(i, m) * basis(j, m);
      out(i, j) = acc;
      out(j, i) = acc;
    }
  return out;
}

// Orthonormal basis whose first column is e = 1/sqrt(D), completed by
// Gram-Schmidt over the standard basis in index order.
Matrix mean_direction_basis(std::size_t d) {
  Matrix v(d, d);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i) v(i, 0) = inv_sqrt_d;
  std::size_t filled = 1;
  for (std::size_t cand = 0; cand < d && filled < d; ++cand) {
    Vector w(d, 0.0);
    w[cand] = 1.0;
    for (std::size_t col = 0; col < filled; ++col) {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += v(i, col) * w[i];
      for (std::size_t i = 0; i < d; ++i) w[i] -= proj * v(i, col);
    }
    double norm = 0.0;
    for (double value : w) norm += value * value;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (std::size_t i = 0; i < d; ++i) v(i, filled) = w[i] / norm;
    ++filled;
  }
  if (filled != d) throw NumericError("pca_structure: basis completion failed");
  return v;
}

std::vector<double> pack_lower(const Matrix& l) {
  std::vector<double> packed;
  packed.reserve(l.rows() * (l.rows() + 1) / 2);
  for (std::size_t row = 0; row < l.rows(); ++row)
    for (std::size_t col = 0; col <= row; ++col) packed.push_back(l(row, col));
  return packed;
}

}  // namespace

Matrix build_cov(const ExpCovSpec& spec) {
  if (spec.sigma2 <= 0.0) throw ConfigError("build_cov: sigma2 must be positive");
  if (spec.length <= 0.0) throw ConfigError("build_cov: length must be positive");
  if (spec.axis_scale <= 0.0) throw ConfigError("build_cov: axis_scale must be positive");
  const std::size_t d = spec.dimension();
  if (d == 0) throw ConfigError("build_cov: empty dimension");

  Matrix sigma(d, d);
  if (spec.kind == ExpCovSpec::Kind::kIndex) {
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double dist = static_cast<double>(i > j ? i - j : j - i);
        sigma(i, j) = spec.sigma2 * std::exp(-dist / spec.length);
      }
  } else {
    // point i = (row, col) sits at (x, y) = (col, axis_scale * row)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double xi = static_cast<double>(i % spec.cols);
        const double yi = spec.axis_scale * static_cast<double>(i / spec.cols);
        const double xj = static_cast<double>(j % spec.cols);
        const double yj = spec.axis_scale * static_cast<double>(j / spec.cols);
        const double dist = std::hypot(xi - xj, yi - yj);
        sigma(i, j) = spec.sigma2 * std::exp(-dist / spec.length);
      }
  }
  return sigma;
}

MisspecSpec MisspecSpec::mean_bias(double delta) {
  MisspecSpec spec;
  spec.kind = Kind::kMeanBias;
  spec.delta = delta;
  return spec;
}
MisspecSpec MisspecSpec::variance_scale(double c_var) {
  MisspecSpec spec;
  spec.kind = Kind::kVarianceScale;
  spec.c_var = c_var;
  return spec;
}
MisspecSpec MisspecSpec::range_change(double new_length) {
  MisspecSpec spec;
  spec.kind = Kind::kRangeChange;
  spec.new_length = new_length;
  return spec;
}
MisspecSpec MisspecSpec::spectrum_scramble(double gamma) {
  MisspecSpec spec;
  spec.kind = Kind::kSpectrumScramble;
  spec.gamma = gamma;
  return spec;
}
MisspecSpec MisspecSpec::pca_structure(double c, std::size_t k) {
  MisspecSpec spec;
  spec.kind = Kind::kPcaStructure;
  spec.c = c;
  spec.k = k;
  return spec;
}
MisspecSpec MisspecSpec::isotropy(double alpha) {
  MisspecSpec spec;
  spec.kind = Kind::kIsotropy;
  spec.alpha = alpha;
  return spec;
}
MisspecSpec MisspecSpec::pc_anisotropy_flip(double a, std::size_t k, bool rotation) {
  MisspecSpec spec;
  spec.kind = Kind::kPcAnisotropyFlip;
  spec.a = a;
  spec.k = k;
  spec.rotation = rotation;
  return spec;
}

Matrix spectrum_scramble(const Matrix& sigma, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw ConfigError("spectrum_scramble: gamma must lie in [0,1]");
  const EigenDecomposition eig = sym_eigen(sigma);
  const std::size_t d = sigma.rows();
  Vector blended(d);
  double trace_in = 0.0;
  double trace_out = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    blended[i] = (1.0 - gamma) * eig.values[i] + gamma * eig.values[d - 1 - i];
    trace_in += eig.values[i];
    trace_out += blended[i];
  }
  const double factor = trace_in / trace_out;
  for (double& value : blended) value *= factor;
  return from_spectrum(eig.vectors, blended);
}

Matrix pca_structure(const Matrix& sigma, double c, std::size_t k) {
  if (c < 1.0) throw ConfigError("pca_structure: c must be at least 1");
  if (k < 1) throw ConfigError("pca_structure: k must be at least 1");
  const std::size_t d = sigma.rows();
  if (d < 3) throw DimensionTooSmall("pca_structure: needs dimension >= 3");
  if (2 * k > d - 1)
    throw IndexOverlap("pca_structure: amplified and shrunk blocks overlap (2k > D-1)");

  const Matrix v = mean_direction_basis(d);
  const Matrix s = v.transposed() * sigma * v;

  Matrix s_perp(d - 1, d - 1);
  for (std::size_t i = 0; i < d - 1; ++i)
    for (std::size_t j = 0; j < d - 1; ++j) s_perp(i, j) = s(i + 1, j + 1);
  const EigenDecomposition eig = sym_eigen(s_perp);

  Vector distorted(eig.values);
  for (std::size_t i = 0; i < k; ++i) distorted[i] *= c;
  for (std::size_t i = d - 1 - k; i < d - 1; ++i) distorted[i] /= c;
  const Matrix block = from_spectrum(eig.vectors, distorted);

  Matrix s_tilde = s;
  for (std::size_t i = 0; i < d - 1; ++i)
    for (std::size_t j = 0; j < d - 1; ++j) s_tilde(i + 1, j + 1) = block(i, j);

  Matrix out = v * s_tilde * v.transposed();
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double avg = 0.5 * (out(i, j) + out(j, i));
      out(i, j) = avg;
      out(j, i) = avg;
    }
  return out;
}

Matrix pc_anisotropy_flip(const Matrix& sigma, double a, std::size_t k, bool rotation) {
  if (a < 1.0) throw ConfigError("pc_anisotropy_flip: a must be at least 1");
  if (k < 1) throw ConfigError("pc_anisotropy_flip: k must be at least 1");
  const std::size_t d = sigma.rows();
  if (d < 2) throw DimensionTooSmall("pc_anisotropy_flip: needs dimension >= 2");
  if (2 * k > d)
    throw DimensionTooSmall("pc_anisotropy_flip: amplified and shrunk blocks overlap (2k > D)");

  const EigenDecomposition eig = sym_eigen(sigma);
  Vector flipped(d);
  double trace_in = 0.0;
  double trace_out = 0.0;
  for (std::size_t i = 1; i <= d; ++i) {
    const double reversed = eig.values[d - i];  // lambda_{D-i+1}
    double value = reversed;
    if (i <= k)
      value = a * reversed;
    else if (i >= d - k + 1)
      value = reversed / a;
    flipped[i - 1] = value;
    trace_in += eig.values[i - 1];
    trace_out += value;
  }
  const double factor = trace_in / trace_out;
  for (double& value : flipped) value *= factor;

  if (!rotation) return from_spectrum(eig.vectors, flipped);

  // quarter turn in the (1,2) principal plane: new first axis is u2, new
  // second axis is -u1
  Matrix rotated = eig.vectors;
  for (std::size_t i = 0; i < d; ++i) {
    rotated(i, 0) = eig.vectors(i, 1);
    rotated(i, 1) = -eig.vectors(i, 0);
  }
  return from_spectrum(rotated, flipped);
}

ForecastLaw misspecified_law(const ExpCovSpec& true_spec, const MisspecSpec& misspec) {
  const std::size_t d = true_spec.dimension();
  ForecastLaw law;
  law.mean.assign(d, 0.0);
  switch (misspec.kind) {
    case MisspecSpec::Kind::kNone:
      law.cov = build_cov(true_spec);
      break;
    case MisspecSpec::Kind::kMeanBias:
      law.mean.assign(d, misspec.delta);
      law.cov = build_cov(true_spec);
      break;
    case MisspecSpec::Kind::kVarianceScale: {
      if (misspec.c_var <= 0.0) throw ConfigError("variance_scale: factor must be positive");
      law.cov = build_cov(true_spec);
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) law.cov(i, j) *= misspec.c_var;
      break;
    }
    case MisspecSpec::Kind::kRangeChange: {
      ExpCovSpec altered = true_spec;
      altered.length = misspec.new_length;
      law.cov = build_cov(altered);
      break;
    }
    case MisspecSpec::Kind::kSpectrumScramble:
      law.cov = spectrum_scramble(build_cov(true_spec), misspec.gamma);
      break;
    case MisspecSpec::Kind::kPcaStructure:
      law.cov = pca_structure(build_cov(true_spec), misspec.c, misspec.k);
      break;
    case MisspecSpec::Kind::kIsotropy: {
      if (true_spec.kind != ExpCovSpec::Kind::kGrid)
        throw ConfigError("isotropy: requires a spatial-grid covariance spec");
      ExpCovSpec altered = true_spec;
      altered.axis_scale = misspec.alpha;
      law.cov = build_cov(altered);
      break;
    }
    case MisspecSpec::Kind::kPcAnisotropyFlip:
      law.cov =
          pc_anisotropy_flip(build_cov(true_spec), misspec.a, misspec.k, misspec.rotation);
      break;
  }
  return law;
}

SimulationRun run_simulation(const SimulationConfig& config) {
  if (config.cases < 1) throw ConfigError("run_simulation: need at least one case");
  if (config.ensemble < 2) throw ConfigError("run_simulation: ensemble size must be >= 2");
  if (config.preranks.empty()) throw ConfigError("run_simulation: no pre-ranks configured");

  const Matrix sigma_true = build_cov(config.true_spec);
  const std::size_t d = sigma_true.rows();
  const Matrix l_true = cholesky(sigma_true);
  ForecastLaw law = misspecified_law(config.true_spec, config.misspec);
  const Matrix l_pred = cholesky(law.cov);

  bool needs_pool = false;
  for (const auto& prerank : config.preranks) {
    using K = preranks::Kind;
    if (prerank.kind == K::kCopula || prerank.kind == K::kPca) needs_pool = true;
    if (prerank.kind == K::kMarginal && prerank.index > d)
      throw ConfigError("run_simulation: marginal coordinate exceeds dimension");
    if (prerank.kind == K::kDependency && prerank.index >= d)
      throw ConfigError("run_simulation: dependency lag exceeds dimension");
    if (prerank.kind == K::kPca && (prerank.index < 1 || prerank.index > d))
      throw ConfigError("run_simulation: principal component index exceeds dimension");
    if (prerank.kind == K::kPca && prerank.index > config.ensemble - 1)
      throw ConfigError("run_simulation: principal component index exceeds ensemble rank");
  }
  if (needs_pool && config.copula_pool < 1)
    throw ConfigError("run_simulation: copula/pca side pool must be positive");

  // closed-form forecast density for the HDR projection
  model::ModelConfig density_cfg;
  density_cfg.input_dim = 1;
  density_cfg.target_dim = d;
  density_cfg.components = 1;
  model::MixtureParams<double> forecast_mix;
  forecast_mix.log_weights = {0.0};
  forecast_mix.weights = {1.0};
  forecast_mix.means = law.mean;
  forecast_mix.chol = pack_lower(l_pred);
  preranks::DensityFn density = [&](std::span<const double> point) {
    return std::exp(model::log_density<double, double>(density_cfg, forecast_mix, point));
  };

  SimulationRun run;
  run.cases = config.cases;
  run.ensemble = config.ensemble;
  run.forecast = law;
  run.preranks = config.preranks;
  run.pits.resize(config.preranks.size());
  std::vector<std::size_t> width(config.preranks.size(), 1);
  for (std::size_t p = 0; p < config.preranks.size(); ++p) {
    if (config.preranks[p].kind == preranks::Kind::kMarginal && config.preranks[p].index == 0)
      width[p] = d;
    run.pits[p].assign(config.cases * width[p], 0.0);
  }

  const Vector zero_mean(d, 0.0);
  parallel_for(config.cases, config.threads, [&](std::size_t case_index) {
    RngStream rng(config.seed, mix_stream({kCaseStreamTag, case_index}));
    const Vector y = mvn_sample(zero_mean, l_true, rng);
    preranks::SampleSet ensemble;
    ensemble.reserve(config.ensemble);
    for (std::size_t m = 0; m < config.ensemble; ++m)
      ensemble.push_back(mvn_sample(law.mean, l_pred, rng));

    preranks::SampleSet pool;
    if (needs_pool) {
      RngStream pool_rng = rng.substream(kCopulaPoolSalt);
      pool.reserve(config.copula_pool);
      for (std::size_t s = 0; s < config.copula_pool; ++s)
        pool.push_back(mvn_sample(law.mean, l_pred, pool_rng));
    }

    Vector member_values(config.ensemble);
    for (std::size_t p = 0; p < config.preranks.size(); ++p) {
      const preranks::PreRank& prerank = config.preranks[p];
      using K = preranks::Kind;
      if (prerank.kind == K::kMarginal && prerank.index == 0) {
        for (std::size_t dim = 0; dim < d; ++dim) {
          for (std::size_t m = 0; m < config.ensemble; ++m)
            member_values[m] = ensemble[m][dim];
          run.pits[p][case_index * d + dim] =
              diagnostics::projected_pit_hard(y[dim], member_values);
        }
        continue;
      }
      double t = 0.0;
      if (prerank.kind == K::kPca) {
        // The axis is a property of the forecast, so it comes from the side pool,
        // not from the members being ranked: projecting members onto their own
        // leading axis inflates their pre-ranks relative to the observation and
        // skews the rank histogram even for a perfect forecast.  One
        // eigendecomposition per case; going through preranks::pca would redo it
        // M+1 times.
        const Matrix cov = sample_covariance(pool);
        const EigenDecomposition eig = sym_eigen(cov);
        const std::size_t axis = prerank.index - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) acc += eig.vectors(i, axis) * y[i];
        t = acc;
        for (std::size_t m = 0; m < config.ensemble; ++m) {
          double proj = 0.0;
          for (std::size_t i = 0; i < d; ++i) proj += eig.vectors(i, axis) * ensemble[m][i];
          member_values[m] = proj;
        }
      } else {
        preranks::PreRankContext ctx;
        ctx.density = density;
        ctx.samples = needs_pool ? &pool : nullptr;
        // smooth CDF estimate: the hard indicator version takes only S+1 distinct
        // values, and the resulting pre-rank ties bias the inclusive rank count
        ctx.smooth_copula = true;
        t = preranks::evaluate(prerank, y, ctx);
        for (std::size_t m = 0; m < config.ensemble; ++m)
          member_values[m] = preranks::evaluate(prerank, ensemble[m], ctx);
      }
      run.pits[p][case_index] = diagnostics::projected_pit_hard(t, member_values);
    }
  });
  return run;
}

}  // namespace precal::scenarios
