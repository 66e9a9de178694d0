#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "precal/diagnostics.hpp"
#include "precal/errors.hpp"
#include "precal/matrix.hpp"
#include "precal/model.hpp"
#include "precal/param_vector.hpp"
#include "precal/preranks.hpp"

// Minibatch training of the mixture hypernetwork on NLL plus lambda times a
// kernel-smoothed calibration penalty of the projected PITs, and the
// validation-driven lambda selection rule.

namespace precal::training {

struct TrainConfig {
  double lambda = 0.0;
  double tau = 100.0;      // sigmoid temperature for smooth PITs and the CDF kernel
  double tau_cop = 100.0;  // inner copula product sigmoid
  double p = 1.0;          // penalty exponent
  std::size_t grid_size = 100;
  std::size_t ensemble = 100;  // predictive draws per case inside the loss
  std::size_t batch_size = 512;
  std::size_t epochs = 100;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::vector<preranks::PreRank> preranks;
  std::vector<double> prerank_weights;  // empty = equal weights
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  // minibatch gradients are reduced over this many fixed shards so the sum
  // order does not depend on the thread count
  std::size_t grad_shards = 16;
  // compute the PIT sample for the penalty over the whole training split
  // instead of the minibatch
  bool full_set_regularizer = false;
  // per-epoch validation metrics
  std::size_t val_ensemble = 100;
  std::size_t copula_pool = 2000;
};

struct TrainData {
  std::vector<Vector> x;
  std::vector<Vector> y;

  std::size_t size() const { return x.size(); }
};

// ---- optimizer ----------------------------------------------------------------

class Adam {
 public:
  Adam(std::size_t dim, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  void step(std::span<double> params, std::span<const double> gradient);
  std::size_t steps_taken() const { return t_; }

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::size_t t_ = 0;
};

// ---- loss ----------------------------------------------------------------------

struct BatchLossResult {
  double loss = 0.0;
  double nll = 0.0;          // mean over the batch
  double regularizer = 0.0;  // weighted PCE-KDE of the smooth PITs (0 when lambda = 0)
  std::vector<double> gradient;
};

// Mean NLL over the batch plus lambda times the smoothed calibration penalty
// of the batch's projected PITs.  Sampling streams are keyed by (seed, step,
// element content), so duplicated elements draw identical ensembles and the
// result does not depend on batch composition order.
BatchLossResult batch_loss(const model::ModelConfig& model_config,
                           std::span<const double> params, std::span<const Vector> batch_x,
                           std::span<const Vector> batch_y, const TrainConfig& config,
                           std::uint64_t step);

// Same, with the PIT sample for the penalty taken from an explicit set (the
// full training split in full-set mode).
BatchLossResult batch_loss(const model::ModelConfig& model_config,
                           std::span<const double> params, std::span<const Vector> batch_x,
                           std::span<const Vector> batch_y, std::span<const Vector> reg_x,
                           std::span<const Vector> reg_y, const TrainConfig& config,
                           std::uint64_t step);

// ---- evaluation -----------------------------------------------------------------

struct EvalConfig {
  std::vector<preranks::PreRank> preranks;
  std::size_t ensemble = 100;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t copula_pool = 2000;
  double tau_cop = 100.0;
};

struct EvalReport {
  double nll = 0.0;
  double energy = 0.0;
  // hard projected PITs per pre-rank, pooled in case order (pooled marginal
  // contributes D entries per case)
  std::vector<std::vector<double>> pits;
};

// Hard-PIT diagnostics of a trained model on a data split.  Streams are keyed
// by example content only (not epoch or step), so the numbers match between
// the training trace and a later standalone evaluation with the same seed.
EvalReport evaluate_model(const model::ModelConfig& model_config,
                          std::span<const double> params, const TrainData& split,
                          const EvalConfig& config);

// ---- training loop ---------------------------------------------------------------

struct EpochTrace {
  double train_loss = 0.0;
  double val_nll = 0.0;
  std::vector<double> val_pce;  // one entry per configured pre-rank
  double val_es = 0.0;
};

struct TrainedModel {
  model::ModelConfig model;
  ParamVector params;
  std::vector<EpochTrace> trace;
};

TrainedModel train(const model::ModelConfig& model_config, const TrainData& train_split,
                   const TrainData& val_split, const TrainConfig& config);

// ---- lambda selection --------------------------------------------------------------

struct LambdaCandidate {
  double lambda = 0.0;
  double val_pce = 0.0;  // mean over configured pre-ranks
  double val_es = 0.0;
  bool feasible = false;  // val_es <= 1.1 * val_es(lambda = 0)
};

struct LambdaSelection {
  std::vector<LambdaCandidate> candidates;
  double chosen = 0.0;
  std::size_t chosen_index = 0;
  double constraint_slack = 0.0;  // 1.1 * es(0) - es(chosen)
  TrainedModel model;             // the retained run for the chosen lambda
};

// Train one model per lambda; among candidates whose validation energy score
// stays within 10% of the unregularized run, pick the smallest validation
// PCE (ties to the smaller lambda).  Falls back to lambda = 0 when nothing
// is feasible.  The grid must contain 0.
LambdaSelection select_lambda(const model::ModelConfig& model_config,
                              const TrainData& train_split, const TrainData& val_split,
                              TrainConfig base, std::span<const double> lambda_grid);

}  // namespace precal::training
