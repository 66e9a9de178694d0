#include "precal/model.hpp"

#include <cmath>
#include <string>

namespace precal::model {

Hypernetwork::Hypernetwork(ModelConfig config) : config_(std::move(config)) {
  if (config_.input_dim == 0 || config_.target_dim == 0 || config_.components == 0)
    throw ConfigError("Hypernetwork: dimensions must be positive");
  std::size_t in_dim = config_.input_dim;
  for (std::size_t layer = 0; layer < config_.hidden.size(); ++layer) {
    const std::size_t out_dim = config_.hidden[layer];
    if (out_dim == 0) throw ConfigError("Hypernetwork: hidden layer width must be positive");
    const std::string tag = "layer" + std::to_string(layer);
    params_.add_segment(tag + ".w", out_dim * in_dim);
    params_.add_segment(tag + ".b", out_dim);
    in_dim = out_dim;
  }
  const std::size_t k = config_.components;
  const std::size_t d = config_.target_dim;
  const std::size_t chol_rows = k * (config_.diagonal_covariance ? d : config_.chol_packed());
  params_.add_segment("logits.w", k * in_dim);
  params_.add_segment("logits.b", k);
  params_.add_segment("means.w", k * d * in_dim);
  params_.add_segment("means.b", k * d);
  params_.add_segment("chol.w", chol_rows * in_dim);
  params_.add_segment("chol.b", chol_rows);
}

void Hypernetwork::init(RngStream& rng) {
  std::size_t in_dim = config_.input_dim;
  auto fill_weight = [&](std::span<double> w, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w) v = bound * (2.0 * rng.uniform() - 1.0);
  };
  auto zero = [](std::span<double> b) {
    for (double& v : b) v = 0.0;
  };
  for (std::size_t layer = 0; layer < config_.hidden.size(); ++layer) {
    const std::string tag = "layer" + std::to_string(layer);
    fill_weight(params_.segment(tag + ".w"), in_dim);
    zero(params_.segment(tag + ".b"));
    in_dim = config_.hidden[layer];
  }
  for (const char* head : {"logits", "means", "chol"}) {
    fill_weight(params_.segment(std::string(head) + ".w"), in_dim);
    zero(params_.segment(std::string(head) + ".b"));
  }
}

double mc_cdf(const ModelConfig& config, const MixtureParams<double>& mix,
              std::span<const double> y, std::size_t count, RngStream& rng, bool smooth,
              double tau_cop) {
  if (count == 0) throw ConfigError("mc_cdf: sample count must be positive");
  const auto pool = sample_mixture<double>(config, mix, count, rng);
  Vector point(y.begin(), y.end());
  if (smooth) return preranks::copula_smooth(point, pool, tau_cop);
  return preranks::copula_hard(point, pool);
}

}  // namespace precal::model
