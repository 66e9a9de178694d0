#include "precal/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "precal/linalg.hpp"
#include "precal/parallel.hpp"

namespace precal::training {

namespace {

constexpr std::uint64_t kInitStream = 0x696e697468797065ULL;
constexpr std::uint64_t kShuffleTag = 0x73687566666c6530ULL;
constexpr std::uint64_t kDrawTag = 0x747261696e647277ULL;
constexpr std::uint64_t kEvalTag = 0x6576616c64726177ULL;
constexpr std::uint64_t kEvalPoolSalt = 0x6576616c706f6f6cULL;

std::size_t prerank_width(const preranks::PreRank& p, std::size_t d) {
  return (p.kind == preranks::Kind::kMarginal && p.index == 0) ? d : 1;
}

std::size_t expected_param_count(const model::ModelConfig& m) {
  std::size_t total = 0;
  std::size_t in_dim = m.input_dim;
  for (std::size_t width : m.hidden) {
    total += width * in_dim + width;
    in_dim = width;
  }
  const std::size_t h = m.hidden.empty() ? m.input_dim : m.hidden.back();
  const std::size_t chol_rows =
      m.components * (m.diagonal_covariance ? m.target_dim : m.chol_packed());
  total += m.components * (h + 1);
  total += m.components * m.target_dim * (h + 1);
  total += chol_rows * (h + 1);
  return total;
}

void check_prerank(const preranks::PreRank& p, std::size_t d, std::size_t ensemble) {
  switch (p.kind) {
    case preranks::Kind::kMarginal:
      if (p.index > d) throw ConfigError("training: marginal coordinate exceeds dimension");
      return;
    case preranks::Kind::kDependency:
      if (p.index < 1 || p.index >= d)
        throw ConfigError("training: dependency lag must satisfy 1 <= h <= D-1");
      return;
    case preranks::Kind::kPca:
      if (p.index < 1 || p.index > d)
        throw ConfigError("training: pca component exceeds dimension");
      if (p.index + 1 > ensemble)
        throw ConfigError("training: pca component exceeds ensemble rank");
      return;
    default:
      return;
  }
}

std::vector<double> normalized_weights(const TrainConfig& cfg) {
  const std::size_t n = cfg.preranks.size();
  std::vector<double> w(cfg.prerank_weights);
  if (w.empty()) w.assign(n, 1.0);
  if (w.size() != n)
    throw ConfigError("training: pre-rank weight count does not match pre-rank count");
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) throw ConfigError("training: pre-rank weights must be nonnegative");
    total += v;
  }
  if (!(total > 0.0)) throw ConfigError("training: pre-rank weights sum to zero");
  for (double& v : w) v /= total;
  return w;
}

void validate_common(const model::ModelConfig& mcfg, const TrainConfig& cfg) {
  if (!(cfg.lambda >= 0.0)) throw ConfigError("training: lambda must be nonnegative");
  if (!(cfg.tau > 0.0) || !(cfg.tau_cop > 0.0))
    throw ConfigError("training: smoothing temperature must be positive");
  if (!(cfg.p >= 1.0)) throw ConfigError("training: penalty exponent must be >= 1");
  if (cfg.grid_size < 1) throw ConfigError("training: empty quantile grid");
  if (cfg.ensemble < 2) throw ConfigError("training: need at least 2 predictive draws");
  if (cfg.lambda > 0.0) {
    if (cfg.preranks.empty())
      throw ConfigError("training: the calibration penalty needs at least one pre-rank");
    for (const auto& p : cfg.preranks) check_prerank(p, mcfg.target_dim, cfg.ensemble);
    normalized_weights(cfg);
  }
}

void check_split(const model::ModelConfig& mcfg, std::span<const Vector> xs,
                 std::span<const Vector> ys, const char* what) {
  if (xs.size() != ys.size())
    throw DimensionMismatch(std::string("training: ") + what + " feature/target count mismatch");
  for (const Vector& x : xs)
    if (x.size() != mcfg.input_dim)
      throw DimensionMismatch(std::string("training: ") + what + " feature size mismatch");
  for (const Vector& y : ys)
    if (y.size() != mcfg.target_dim)
      throw DimensionMismatch(std::string("training: ") + what + " target size mismatch");
}

std::uint64_t element_stream(std::uint64_t tag, std::uint64_t step, const Vector& x,
                             const Vector& y) {
  return mix_stream({tag, step, content_hash(x), content_hash(y)});
}

// Smooth projected PITs of one element against its own predictive ensemble,
// in the flat order (pre-rank major, coordinate minor for the pooled
// marginal).  Templated so the values pass and the tape pass run identical
// arithmetic.
template <class S>
std::vector<S> element_pits(const model::ModelConfig& mcfg, const TrainConfig& cfg,
                            const model::MixtureParams<S>& mix,
                            const std::vector<std::vector<S>>& samples, const Vector& y) {
  const std::size_t d = mcfg.target_dim;
  const std::size_t m = samples.size();
  const std::span<const double> yspan(y);
  std::vector<S> out;
  std::vector<S> that;
  that.reserve(m);

  for (const auto& p : cfg.preranks) {
    that.clear();
    switch (p.kind) {
      case preranks::Kind::kMarginal: {
        const std::size_t lo = p.index == 0 ? 0 : p.index - 1;
        const std::size_t hi = p.index == 0 ? d : p.index;
        for (std::size_t dd = lo; dd < hi; ++dd) {
          that.clear();
          for (const auto& s : samples) that.push_back(s[dd]);
          out.push_back(diagnostics::projected_pit_smooth_of<double, S>(
              y[dd], std::span<const S>(that), cfg.tau));
        }
        break;
      }
      case preranks::Kind::kLocation: {
        const double t = preranks::location(yspan);
        for (const auto& s : samples)
          that.push_back(preranks::location_of<S>(std::span<const S>(s)));
        out.push_back(diagnostics::projected_pit_smooth_of<double, S>(
            t, std::span<const S>(that), cfg.tau));
        break;
      }
      case preranks::Kind::kScale: {
        const double t = preranks::scale(yspan);
        for (const auto& s : samples)
          that.push_back(preranks::scale_of<S>(std::span<const S>(s)));
        out.push_back(diagnostics::projected_pit_smooth_of<double, S>(
            t, std::span<const S>(that), cfg.tau));
        break;
      }
      case preranks::Kind::kDependency: {
        const double t = preranks::dependency(yspan, p.index);
        for (const auto& s : samples)
          that.push_back(preranks::dependency_of<S>(std::span<const S>(s), p.index));
        out.push_back(diagnostics::projected_pit_smooth_of<double, S>(
            t, std::span<const S>(that), cfg.tau));
        break;
      }
      case preranks::Kind::kHdr: {
        // the density height moves with the parameters, so the observation
        // pre-rank carries gradients here too
        const S t = exp(model::log_density<S, double>(mcfg, mix, yspan));
        for (const auto& s : samples)
          that.push_back(exp(model::log_density<S, S>(mcfg, mix, std::span<const S>(s))));
        out.push_back(
            diagnostics::projected_pit_smooth_of<S, S>(t, std::span<const S>(that), cfg.tau));
        break;
      }
      case preranks::Kind::kCopula: {
        // smoothed MC CDF with the ensemble itself as the pool
        const auto t = preranks::copula_smooth_of<double, S>(yspan, samples, cfg.tau_cop);
        for (const auto& s : samples)
          that.push_back(
              preranks::copula_smooth_of<S, S>(std::span<const S>(s), samples, cfg.tau_cop));
        out.push_back(diagnostics::projected_pit_smooth_of<decltype(t), S>(
            t, std::span<const S>(that), cfg.tau));
        break;
      }
      case preranks::Kind::kPca: {
        // axis from the sample values only; no gradient through the
        // eigendecomposition
        preranks::SampleSet values(m, Vector(d));
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t i = 0; i < d; ++i) values[j][i] = value_of(samples[j][i]);
        const Matrix cov = sample_covariance(values);
        const EigenDecomposition eig = sym_eigen(cov);
        Vector axis(d);
        for (std::size_t i = 0; i < d; ++i) axis[i] = eig.vectors(i, p.index - 1);
        double t = 0.0;
        for (std::size_t i = 0; i < d; ++i) t += axis[i] * y[i];
        for (const auto& s : samples)
          that.push_back(dot(std::span<const S>(s), std::span<const double>(axis)));
        out.push_back(diagnostics::projected_pit_smooth_of<double, S>(
            t, std::span<const S>(that), cfg.tau));
        break;
      }
    }
  }
  return out;
}

struct ElementTask {
  const Vector* x;
  const Vector* y;
  bool want_nll = false;
  bool want_z = false;
  std::size_t nll_slot = 0;
  std::size_t z_slot = 0;
};

}  // namespace

// ---- optimizer ----------------------------------------------------------------

Adam::Adam(std::size_t dim, double learning_rate, double beta1, double beta2, double eps)
    : m_(dim, 0.0), v_(dim, 0.0), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr_ > 0.0)) throw ConfigError("adam: learning rate must be positive");
  if (!(beta1_ >= 0.0 && beta1_ < 1.0) || !(beta2_ >= 0.0 && beta2_ < 1.0))
    throw ConfigError("adam: decay rates must lie in [0, 1)");
  if (!(eps_ > 0.0)) throw ConfigError("adam: epsilon must be positive");
}

void Adam::step(std::span<double> params, std::span<const double> gradient) {
  if (params.size() != m_.size() || gradient.size() != m_.size())
    throw DimensionMismatch("adam: parameter/gradient size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t j = 0; j < m_.size(); ++j) {
    const double g = gradient[j];
    m_[j] = beta1_ * m_[j] + (1.0 - beta1_) * g;
    v_[j] = beta2_ * v_[j] + (1.0 - beta2_) * g * g;
    params[j] -= lr_ * (m_[j] / c1) / (std::sqrt(v_[j] / c2) + eps_);
  }
}

// ---- loss ----------------------------------------------------------------------

BatchLossResult batch_loss(const model::ModelConfig& model_config,
                           std::span<const double> params, std::span<const Vector> batch_x,
                           std::span<const Vector> batch_y, const TrainConfig& config,
                           std::uint64_t step) {
  return batch_loss(model_config, params, batch_x, batch_y, batch_x, batch_y, config, step);
}

BatchLossResult batch_loss(const model::ModelConfig& mcfg, std::span<const double> params,
                           std::span<const Vector> batch_x, std::span<const Vector> batch_y,
                           std::span<const Vector> reg_x, std::span<const Vector> reg_y,
                           const TrainConfig& cfg, std::uint64_t step) {
  validate_common(mcfg, cfg);
  if (batch_x.size() < 2) throw ConfigError("batch_loss: need at least 2 elements");
  check_split(mcfg, batch_x, batch_y, "batch");
  if (params.size() != expected_param_count(mcfg))
    throw DimensionMismatch("batch_loss: parameter vector does not match the configuration");

  const bool want_reg = cfg.lambda > 0.0 && !cfg.preranks.empty();
  const bool same_set =
      reg_x.data() == batch_x.data() && reg_x.size() == batch_x.size();
  if (want_reg) {
    if (reg_x.size() < 2) throw ConfigError("batch_loss: regularizer set needs >= 2 elements");
    if (!same_set) check_split(mcfg, reg_x, reg_y, "regularizer set");
  }

  const std::size_t b = batch_x.size();
  const std::size_t n_reg = want_reg ? reg_x.size() : 0;
  const std::size_t d = mcfg.target_dim;
  const std::size_t n_pre = cfg.preranks.size();

  // flat PIT layout: per pre-rank, n_reg contiguous blocks of its width
  std::vector<std::size_t> width(n_pre, 1);
  std::vector<std::size_t> offset(n_pre, 0);
  std::size_t z_total = 0;
  if (want_reg) {
    for (std::size_t p = 0; p < n_pre; ++p) {
      width[p] = prerank_width(cfg.preranks[p], d);
      offset[p] = z_total;
      z_total += n_reg * width[p];
    }
  }
  std::size_t pits_per_case = 0;
  for (std::size_t p = 0; p < n_pre; ++p) pits_per_case += width[p];

  std::vector<ElementTask> tasks;
  if (want_reg && !same_set) {
    tasks.reserve(b + n_reg);
    for (std::size_t i = 0; i < b; ++i)
      tasks.push_back({&batch_x[i], &batch_y[i], true, false, i, 0});
    for (std::size_t j = 0; j < n_reg; ++j)
      tasks.push_back({&reg_x[j], &reg_y[j], false, true, 0, j});
  } else {
    tasks.reserve(b);
    for (std::size_t i = 0; i < b; ++i)
      tasks.push_back({&batch_x[i], &batch_y[i], true, want_reg, i, i});
  }

  BatchLossResult result;
  result.gradient.assign(params.size(), 0.0);

  try {
    // values pass: plain doubles, streams keyed by (seed, step, content)
    std::vector<double> nll_values(b, 0.0);
    std::vector<double> z_values(z_total, 0.0);
    parallel_for(tasks.size(), static_cast<int>(cfg.threads), [&](std::size_t ti) {
      const ElementTask& task = tasks[ti];
      const auto mix = model::forward<double>(mcfg, params, *task.x);
      if (task.want_nll)
        nll_values[task.nll_slot] =
            -model::log_density<double, double>(mcfg, mix, std::span<const double>(*task.y));
      if (task.want_z) {
        RngStream rng(cfg.seed, element_stream(kDrawTag, step, *task.x, *task.y));
        const auto samples = model::sample_mixture<double>(mcfg, mix, cfg.ensemble, rng);
        const std::vector<double> z = element_pits<double>(mcfg, cfg, mix, samples, *task.y);
        std::size_t cursor = 0;
        for (std::size_t p = 0; p < n_pre; ++p)
          for (std::size_t w = 0; w < width[p]; ++w)
            z_values[offset[p] + task.z_slot * width[p] + w] = z[cursor++];
      }
    });

    // combine tape: the only place PITs couple across elements
    Tape combine;
    const std::vector<Var> nll_vars = combine.leaves(nll_values);
    const std::vector<Var> z_vars = combine.leaves(z_values);
    const Var mean_nll = mean(std::span<const Var>(nll_vars));
    Var loss = mean_nll;
    double reg_value = 0.0;
    if (want_reg) {
      const Vector grid = diagnostics::quantile_grid(cfg.grid_size);
      const std::vector<double> w = normalized_weights(cfg);
      Var reg = combine.constant(0.0);
      for (std::size_t p = 0; p < n_pre; ++p) {
        const std::span<const Var> zp(z_vars.data() + offset[p], n_reg * width[p]);
        reg = reg + w[p] * diagnostics::pce_kde_of<Var>(zp, grid, cfg.tau, cfg.p);
      }
      reg_value = value_of(reg);
      loss = mean_nll + cfg.lambda * reg;
    }
    result.loss = value_of(loss);
    result.nll = value_of(mean_nll);
    result.regularizer = reg_value;

    const std::vector<double> adj = combine.gradient(loss);
    auto nll_adjoint = [&](std::size_t slot) { return adj[nll_vars[slot].index()]; };
    auto z_adjoint = [&](std::size_t flat) { return adj[z_vars[flat].index()]; };

    // gradient pass: rebuild each element on its own tape with the same
    // streams and seed the reverse sweep with the combine-tape adjoints;
    // fixed shard count keeps the reduction order independent of threads
    const std::size_t shards =
        std::min<std::size_t>(std::max<std::size_t>(cfg.grad_shards, 1), tasks.size());
    std::vector<std::vector<double>> shard_grad(shards,
                                                std::vector<double>(params.size(), 0.0));
    parallel_for(shards, static_cast<int>(cfg.threads), [&](std::size_t s) {
      std::vector<double>& acc = shard_grad[s];
      for (std::size_t ti = s; ti < tasks.size(); ti += shards) {
        const ElementTask& task = tasks[ti];
        Tape tape;
        const std::vector<Var> leaf = tape.leaves(params);
        const std::span<const Var> theta(leaf);
        const auto mix = model::forward<Var>(mcfg, theta, *task.x);
        std::vector<std::pair<Var, double>> seeds;
        if (task.want_nll) {
          const Var nll =
              -model::log_density<Var, double>(mcfg, mix, std::span<const double>(*task.y));
          seeds.push_back({nll, nll_adjoint(task.nll_slot)});
        }
        if (task.want_z) {
          RngStream rng(cfg.seed, element_stream(kDrawTag, step, *task.x, *task.y));
          const auto samples = model::sample_mixture<Var>(mcfg, mix, cfg.ensemble, rng);
          const std::vector<Var> z = element_pits<Var>(mcfg, cfg, mix, samples, *task.y);
          std::size_t cursor = 0;
          for (std::size_t p = 0; p < n_pre; ++p)
            for (std::size_t w = 0; w < width[p]; ++w)
              seeds.push_back({z[cursor++], z_adjoint(offset[p] + task.z_slot * width[p] + w)});
        }
        const std::vector<double> element_adj = tape.backward(seeds);
        for (std::size_t j = 0; j < params.size(); ++j) acc[j] += element_adj[j];
      }
    });
    for (std::size_t s = 0; s < shards; ++s)
      for (std::size_t j = 0; j < params.size(); ++j) result.gradient[j] += shard_grad[s][j];
  } catch (const NonFiniteValue& e) {
    throw NonFiniteLoss(std::string("batch_loss: ") + e.what());
  }

  if (!std::isfinite(result.loss)) throw NonFiniteLoss("batch_loss: non-finite loss");
  for (double g : result.gradient)
    if (!std::isfinite(g)) throw NonFiniteLoss("batch_loss: non-finite gradient");
  return result;
}

// ---- evaluation -----------------------------------------------------------------

EvalReport evaluate_model(const model::ModelConfig& mcfg, std::span<const double> params,
                          const TrainData& split, const EvalConfig& cfg) {
  if (split.size() == 0) throw ConfigError("evaluate: empty split");
  check_split(mcfg, split.x, split.y, "evaluation");
  if (params.size() != expected_param_count(mcfg))
    throw DimensionMismatch("evaluate: parameter vector does not match the configuration");
  if (cfg.ensemble < 2) throw ConfigError("evaluate: need at least 2 predictive draws");
  bool needs_pool = false;
  for (const auto& p : cfg.preranks) {
    check_prerank(p, mcfg.target_dim, cfg.ensemble);
    needs_pool =
        needs_pool || p.kind == preranks::Kind::kCopula || p.kind == preranks::Kind::kPca;
  }
  if (needs_pool && cfg.copula_pool < 1)
    throw ConfigError("evaluate: copula/pca side pool must be positive");

  const std::size_t n = split.size();
  const std::size_t d = mcfg.target_dim;
  const std::size_t n_pre = cfg.preranks.size();

  EvalReport report;
  report.pits.resize(n_pre);
  std::vector<std::size_t> width(n_pre, 1);
  for (std::size_t p = 0; p < n_pre; ++p) {
    width[p] = prerank_width(cfg.preranks[p], d);
    report.pits[p].assign(n * width[p], 0.0);
  }
  std::vector<double> nll_case(n, 0.0);
  std::vector<double> es_case(n, 0.0);

  parallel_for(n, static_cast<int>(cfg.threads), [&](std::size_t i) {
    const Vector& x = split.x[i];
    const Vector& y = split.y[i];
    RngStream rng(cfg.seed, mix_stream({kEvalTag, content_hash(x), content_hash(y)}));
    const auto mix = model::forward<double>(mcfg, params, x);
    nll_case[i] = -model::log_density<double, double>(mcfg, mix, std::span<const double>(y));
    const preranks::SampleSet samples =
        model::sample_mixture<double>(mcfg, mix, cfg.ensemble, rng);
    es_case[i] = diagnostics::energy_score(samples, y);

    preranks::SampleSet pool;
    if (needs_pool) {
      RngStream pool_rng = rng.substream(kEvalPoolSalt);
      pool = model::sample_mixture<double>(mcfg, mix, cfg.copula_pool, pool_rng);
    }

    std::vector<double> that(cfg.ensemble);
    for (std::size_t p = 0; p < n_pre; ++p) {
      const auto& pre = cfg.preranks[p];
      double* out = report.pits[p].data() + i * width[p];
      if (pre.kind == preranks::Kind::kMarginal && pre.index == 0) {
        for (std::size_t dd = 0; dd < d; ++dd) {
          for (std::size_t m = 0; m < cfg.ensemble; ++m) that[m] = samples[m][dd];
          out[dd] = diagnostics::projected_pit_hard(y[dd], that);
        }
        continue;
      }
      if (pre.kind == preranks::Kind::kPca) {
        // axis from the side pool, not from the ranked draws themselves: members
        // projected onto their own leading axis score systematically higher than
        // the observation, which skews the ranks even for a perfect model
        const Matrix cov = sample_covariance(pool);
        const EigenDecomposition eig = sym_eigen(cov);
        const std::size_t k = pre.index;
        double t = 0.0;
        for (std::size_t ii = 0; ii < d; ++ii) t += eig.vectors(ii, k - 1) * y[ii];
        for (std::size_t m = 0; m < cfg.ensemble; ++m) {
          double acc = 0.0;
          for (std::size_t ii = 0; ii < d; ++ii) acc += eig.vectors(ii, k - 1) * samples[m][ii];
          that[m] = acc;
        }
        out[0] = diagnostics::projected_pit_hard(t, that);
        continue;
      }
      preranks::PreRankContext ctx;
      ctx.density = [&](std::span<const double> pt) {
        return std::exp(model::log_density<double, double>(mcfg, mix, pt));
      };
      ctx.samples = &pool;
      // smooth CDF estimate for the copula projection: the indicator version
      // yields tied pre-ranks that bias the inclusive rank count
      ctx.smooth_copula = true;
      ctx.tau_cop = cfg.tau_cop;
      const double t = preranks::evaluate(pre, y, ctx);
      for (std::size_t m = 0; m < cfg.ensemble; ++m)
        that[m] = preranks::evaluate(pre, samples[m], ctx);
      out[0] = diagnostics::projected_pit_hard(t, that);
    }
  });

  double nll_sum = 0.0;
  double es_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    nll_sum += nll_case[i];
    es_sum += es_case[i];
  }
  report.nll = nll_sum / static_cast<double>(n);
  report.energy = es_sum / static_cast<double>(n);
  if (!std::isfinite(report.nll) || !std::isfinite(report.energy))
    throw NonFiniteValue("evaluate: non-finite metrics; the model diverged or the "
                         "parameters are corrupt");
  return report;
}

// ---- training loop ---------------------------------------------------------------

TrainedModel train(const model::ModelConfig& mcfg, const TrainData& train_split,
                   const TrainData& val_split, const TrainConfig& cfg) {
  validate_common(mcfg, cfg);
  if (train_split.size() < 2) throw ConfigError("train: need at least 2 training examples");
  check_split(mcfg, train_split.x, train_split.y, "train");
  if (val_split.size() > 0) check_split(mcfg, val_split.x, val_split.y, "validation");
  if (cfg.batch_size < 2) throw ConfigError("train: batch size must be at least 2");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");

  model::Hypernetwork net(mcfg);
  RngStream init_rng(cfg.seed, kInitStream);
  net.init(init_rng);
  Adam opt(net.params().size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps_adam);

  const std::size_t n = train_split.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  TrainedModel out;
  out.model = mcfg;
  out.trace.reserve(cfg.epochs);

  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    RngStream shuffle_rng(cfg.seed, mix_stream({kShuffleTag, epoch}));
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = shuffle_rng.uniform_index(i + 1);
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    std::size_t used = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t size = std::min(cfg.batch_size, n - start);
      if (size < 2) continue;  // a trailing singleton cannot carry a PIT sample
      std::vector<Vector> bx(size), by(size);
      for (std::size_t i = 0; i < size; ++i) {
        bx[i] = train_split.x[order[start + i]];
        by[i] = train_split.y[order[start + i]];
      }
      BatchLossResult r;
      try {
        r = cfg.full_set_regularizer
                ? batch_loss(mcfg, net.params().values(), bx, by, train_split.x,
                             train_split.y, cfg, step)
                : batch_loss(mcfg, net.params().values(), bx, by, cfg, step);
      } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss("train: epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index) + ": " + e.what());
      }
      opt.step(net.params().values(), r.gradient);
      loss_sum += r.loss * static_cast<double>(size);
      used += size;
      ++step;
    }

    EpochTrace tr;
    tr.train_loss = used > 0 ? loss_sum / static_cast<double>(used) : 0.0;
    if (val_split.size() > 0) {
      EvalConfig ec;
      ec.preranks = cfg.preranks;
      ec.ensemble = cfg.val_ensemble;
      ec.seed = cfg.seed;
      ec.threads = cfg.threads;
      ec.copula_pool = cfg.copula_pool;
      ec.tau_cop = cfg.tau_cop;
      const EvalReport er = evaluate_model(mcfg, net.params().values(), val_split, ec);
      tr.val_nll = er.nll;
      tr.val_es = er.energy;
      const Vector grid = diagnostics::quantile_grid(cfg.grid_size);
      tr.val_pce.reserve(er.pits.size());
      for (const auto& pits : er.pits) tr.val_pce.push_back(diagnostics::pce(pits, grid));
    }
    out.trace.push_back(std::move(tr));
  }

  out.params = net.params();
  return out;
}

// ---- lambda selection --------------------------------------------------------------

LambdaSelection select_lambda(const model::ModelConfig& mcfg, const TrainData& train_split,
                              const TrainData& val_split, TrainConfig base,
                              std::span<const double> lambda_grid) {
  if (lambda_grid.empty()) throw ConfigError("select_lambda: empty lambda grid");
  bool has_zero = false;
  for (double l : lambda_grid) {
    if (!(l >= 0.0)) throw ConfigError("select_lambda: lambdas must be nonnegative");
    has_zero = has_zero || l == 0.0;
  }
  if (!has_zero) throw ConfigError("select_lambda: the grid must contain lambda = 0");
  if (base.preranks.empty())
    throw ConfigError("select_lambda: needs at least one pre-rank");
  if (val_split.size() == 0)
    throw ConfigError("select_lambda: needs a validation split");

  LambdaSelection selection;
  std::vector<TrainedModel> models;
  models.reserve(lambda_grid.size());

  EvalConfig ec;
  ec.preranks = base.preranks;
  ec.ensemble = base.val_ensemble;
  ec.seed = base.seed;
  ec.threads = base.threads;
  ec.copula_pool = base.copula_pool;
  ec.tau_cop = base.tau_cop;
  const Vector grid = diagnostics::quantile_grid(base.grid_size);

  std::size_t zero_index = 0;
  for (std::size_t c = 0; c < lambda_grid.size(); ++c) {
    TrainConfig cfg = base;
    cfg.lambda = lambda_grid[c];
    models.push_back(train(mcfg, train_split, val_split, cfg));
    const EvalReport er =
        evaluate_model(mcfg, models.back().params.values(), val_split, ec);
    LambdaCandidate cand;
    cand.lambda = lambda_grid[c];
    cand.val_es = er.energy;
    double pce_sum = 0.0;
    for (const auto& pits : er.pits) pce_sum += diagnostics::pce(pits, grid);
    cand.val_pce = pce_sum / static_cast<double>(er.pits.size());
    selection.candidates.push_back(cand);
    if (cand.lambda == 0.0 && (zero_index == 0 || lambda_grid[zero_index] != 0.0))
      zero_index = c;
  }

  const double threshold = 1.1 * selection.candidates[zero_index].val_es;
  bool any = false;
  std::size_t best = zero_index;
  for (std::size_t c = 0; c < selection.candidates.size(); ++c) {
    LambdaCandidate& cand = selection.candidates[c];
    cand.feasible = cand.val_es <= threshold;
    if (!cand.feasible) continue;
    if (!any || cand.val_pce < selection.candidates[best].val_pce ||
        (cand.val_pce == selection.candidates[best].val_pce &&
         cand.lambda < selection.candidates[best].lambda)) {
      best = c;
      any = true;
    }
  }
  if (!any) best = zero_index;  // nothing feasible: keep the unregularized run

  selection.chosen = selection.candidates[best].lambda;
  selection.chosen_index = best;
  selection.constraint_slack = threshold - selection.candidates[best].val_es;
  selection.model = std::move(models[best]);
  return selection;
}

}  // namespace precal::training
