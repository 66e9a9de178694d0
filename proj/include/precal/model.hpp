#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "precal/errors.hpp"
#include "precal/linalg.hpp"
#include "precal/param_vector.hpp"
#include "precal/preranks.hpp"
#include "precal/rng.hpp"
#include "precal/tape.hpp"

// Conditional density model: a hypernetwork maps features x to the parameters
// of a K-component multivariate Gaussian mixture (weights, means, Cholesky
// factors).  All value-producing code is templated over the scalar type so
// the tape-based training path and the plain evaluation path execute the
// same arithmetic.

namespace precal::model {

struct ModelConfig {
  std::size_t input_dim = 1;                    // feature count L
  std::size_t target_dim = 1;                   // outcome dimension D
  std::size_t components = 5;                   // mixture size K
  std::vector<std::size_t> hidden = {100, 100, 100};
  bool diagonal_covariance = false;             // restrict Sigma_k to diagonal

  std::size_t chol_packed() const { return target_dim * (target_dim + 1) / 2; }
};

template <class S>
struct MixtureParams {
  std::vector<S> log_weights;  // K
  std::vector<S> weights;      // K, exp(log_weights)
  std::vector<S> means;        // K x D, row-major
  std::vector<S> chol;         // K x D(D+1)/2, packed lower-triangular rows
};

inline std::size_t packed_index(std::size_t d, std::size_t j) { return d * (d + 1) / 2 + j; }

// ---- hypernetwork -----------------------------------------------------------

class Hypernetwork {
 public:
  explicit Hypernetwork(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }

  // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights, zero biases.
  void init(RngStream& rng);

 private:
  ModelConfig config_;
  ParamVector params_;
};

// Run the hypernetwork; `params` must follow the Hypernetwork layout.
template <class S>
MixtureParams<S> forward(const ModelConfig& config, std::span<const S> params,
                         std::span<const double> x, Tape* tape = nullptr);

// ---- mixture density and sampling -------------------------------------------

// log f(y) via log-sum-exp over components; Y may be double (observations)
// or match S (tape-valued sample points).
template <class S, class Y>
S log_density(const ModelConfig& config, const MixtureParams<S>& mix, std::span<const Y> y);

struct NoiseRecord {
  std::size_t component;
  Vector eps;
};

// Draw M samples: categorical component choice on the weight values (no
// gradient through the selection), then mu_k + L_k eps with eps recorded.
// For S = Var the result stays on the tape (reparameterized path).
template <class S>
std::vector<std::vector<S>> sample_mixture(const ModelConfig& config,
                                           const MixtureParams<S>& mix, std::size_t count,
                                           RngStream& rng,
                                           std::vector<NoiseRecord>* noise_out = nullptr);

// Monte Carlo joint CDF at y from `count` fresh predictive samples.
double mc_cdf(const ModelConfig& config, const MixtureParams<double>& mix,
              std::span<const double> y, std::size_t count, RngStream& rng,
              bool smooth = false, double tau_cop = 100.0);

// ---- template definitions ----------------------------------------------------

template <class S>
MixtureParams<S> forward(const ModelConfig& config, std::span<const S> params,
                         std::span<const double> x, Tape*) {
  if (x.size() != config.input_dim) throw DimensionMismatch("forward: feature size mismatch");
  const std::size_t k = config.components;
  const std::size_t d = config.target_dim;
  const std::size_t packed = config.chol_packed();

  std::size_t cursor = 0;
  auto take = [&](std::size_t n) {
    if (cursor + n > params.size())
      throw DimensionMismatch("forward: parameter vector too short for configuration");
    std::span<const S> part = params.subspan(cursor, n);
    cursor += n;
    return part;
  };

  // trunk
  std::vector<S> h;
  {
    std::vector<double> input(x.begin(), x.end());
    std::size_t in_dim = config.input_dim;
    bool first = true;
    std::vector<S> current;
    for (std::size_t layer = 0; layer < config.hidden.size(); ++layer) {
      const std::size_t out_dim = config.hidden[layer];
      std::span<const S> w = take(out_dim * in_dim);
      std::span<const S> b = take(out_dim);
      std::vector<S> next;
      next.reserve(out_dim);
      for (std::size_t row = 0; row < out_dim; ++row) {
        std::span<const S> w_row = w.subspan(row * in_dim, in_dim);
        if (first)
          next.push_back(relu(dot(w_row, std::span<const double>(input)) + b[row]));
        else
          next.push_back(relu(dot(w_row, std::span<const S>(current)) + b[row]));
      }
      current = std::move(next);
      in_dim = out_dim;
      first = false;
    }
    if (first) {
      // no hidden layers: heads read the raw features; keep them as S via a
      // weightless pass-through is not needed because heads consume doubles
      // directly below.
      h.clear();
    } else {
      h = std::move(current);
    }
  }

  const std::size_t h_dim = config.hidden.empty() ? config.input_dim : config.hidden.back();
  std::vector<double> x_const(x.begin(), x.end());
  auto head_output = [&](std::size_t rows) {
    std::span<const S> w = take(rows * h_dim);
    std::span<const S> b = take(rows);
    std::vector<S> out;
    out.reserve(rows);
    for (std::size_t row = 0; row < rows; ++row) {
      std::span<const S> w_row = w.subspan(row * h_dim, h_dim);
      if (config.hidden.empty())
        out.push_back(dot(w_row, std::span<const double>(x_const)) + b[row]);
      else
        out.push_back(dot(w_row, std::span<const S>(h)) + b[row]);
    }
    return out;
  };

  std::vector<S> logits = head_output(k);
  std::vector<S> means = head_output(k * d);
  const std::size_t chol_rows = k * (config.diagonal_covariance ? d : packed);
  std::vector<S> chol_raw = head_output(chol_rows);

  MixtureParams<S> mix;
  const S lse = logsumexp(std::span<const S>(logits));
  mix.log_weights.reserve(k);
  mix.weights.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    mix.log_weights.push_back(logits[i] - lse);
    mix.weights.push_back(exp(mix.log_weights.back()));
  }
  mix.means = std::move(means);

  mix.chol.reserve(k * packed);
  for (std::size_t comp = 0; comp < k; ++comp) {
    if (config.diagonal_covariance) {
      for (std::size_t row = 0; row < d; ++row)
        for (std::size_t col = 0; col <= row; ++col) {
          if (col == row) {
            mix.chol.push_back(softplus(chol_raw[comp * d + row]));
          } else if constexpr (std::is_same_v<S, double>) {
            mix.chol.push_back(0.0);
          } else {
            mix.chol.push_back(chol_raw[0].tape()->constant(0.0));
          }
        }
    } else {
      for (std::size_t row = 0; row < d; ++row)
        for (std::size_t col = 0; col <= row; ++col) {
          const S& raw = chol_raw[comp * packed + packed_index(row, col)];
          if (col == row)
            mix.chol.push_back(softplus(raw));
          else
            mix.chol.push_back(raw);
        }
    }
  }
  return mix;
}

template <class S, class Y>
S log_density(const ModelConfig& config, const MixtureParams<S>& mix, std::span<const Y> y) {
  const std::size_t k = config.components;
  const std::size_t d = config.target_dim;
  if (y.size() != d) throw DimensionMismatch("log_density: outcome size mismatch");
  const std::size_t packed = config.chol_packed();
  constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

  std::vector<S> component_terms;
  component_terms.reserve(k);
  std::vector<S> z;
  std::vector<S> log_diag;
  for (std::size_t comp = 0; comp < k; ++comp) {
    std::span<const S> mu(mix.means.data() + comp * d, d);
    std::span<const S> l(mix.chol.data() + comp * packed, packed);
    z.clear();
    log_diag.clear();
    for (std::size_t row = 0; row < d; ++row) {
      S rhs = [&]() -> S {
        if (row == 0) return y[0] - mu[0];
        return (y[row] - mu[row]) -
               dot(l.subspan(packed_index(row, 0), row), std::span<const S>(z));
      }();
      const S& diag = l[packed_index(row, row)];
      z.push_back(rhs / diag);
      log_diag.push_back(log(diag));
    }
    const S quad = dot(std::span<const S>(z), std::span<const S>(z));
    component_terms.push_back(mix.log_weights[comp] - 0.5 * quad -
                              sum(std::span<const S>(log_diag)) -
                              0.5 * static_cast<double>(d) * kLogTwoPi);
  }
  const S out = logsumexp(std::span<const S>(component_terms));
  if constexpr (std::is_same_v<S, double>) {
    if (!std::isfinite(out)) throw NonFiniteValue("log_density: non-finite result");
  }
  return out;
}

template <class S>
std::vector<std::vector<S>> sample_mixture(const ModelConfig& config,
                                           const MixtureParams<S>& mix, std::size_t count,
                                           RngStream& rng,
                                           std::vector<NoiseRecord>* noise_out) {
  const std::size_t k = config.components;
  const std::size_t d = config.target_dim;
  const std::size_t packed = config.chol_packed();
  std::vector<std::vector<S>> out;
  out.reserve(count);
  if (noise_out) noise_out->clear();

  for (std::size_t m = 0; m < count; ++m) {
    // component choice on parameter values only; the draw order (one uniform,
    // then D normals) is part of the reproducibility contract
    const double u = rng.uniform();
    std::size_t comp = k - 1;
    double cum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      cum += value_of(mix.weights[i]);
      if (u < cum) {
        comp = i;
        break;
      }
    }
    Vector eps(d);
    for (double& e : eps) e = rng.normal();

    std::span<const S> mu(mix.means.data() + comp * d, d);
    std::span<const S> l(mix.chol.data() + comp * packed, packed);
    std::vector<S> y;
    y.reserve(d);
    for (std::size_t row = 0; row < d; ++row)
      y.push_back(mu[row] + dot(l.subspan(packed_index(row, 0), row + 1),
                                std::span<const double>(eps.data(), row + 1)));
    out.push_back(std::move(y));
    if (noise_out) noise_out->push_back({comp, eps});
  }
  return out;
}

}  // namespace precal::model
