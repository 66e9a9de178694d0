#include "precal/commands.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "precal/dataset.hpp"
#include "precal/diagnostics.hpp"
#include "precal/io.hpp"
#include "precal/scenarios.hpp"
#include "precal/training.hpp"

namespace precal::cli {

namespace {

using nlohmann::json;

constexpr std::uint64_t kNullSalt = 0x6e756c6c67617465ULL;
constexpr const char* kVersion = "0.1.0";

std::string one_line(std::string text) {
  for (char& c : text)
    if (c == '\n' || c == '\r') c = ' ';
  return text;
}

template <class Body>
int guarded(const Body& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: data: " << one_line(e.what()) << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: numeric: " << one_line(e.what()) << "\n";
    return 4;
  } catch (const json::exception& e) {
    std::cerr << "error: config: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << "\n";
    return 4;
  }
}

json parse_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

template <class T>
T req(const json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T opt(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

std::vector<preranks::PreRank> parse_preranks(const std::vector<std::string>& names) {
  std::vector<preranks::PreRank> out;
  out.reserve(names.size());
  for (const std::string& name : names) out.push_back(preranks::PreRank::parse(name));
  return out;
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out)
    if (c == ':') c = '_';
  return out;
}

std::string timestamp_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return dir + "/" + name;
}

void write_manifest(const CommonOptions& options, const std::string& command,
                    const json& resolved, std::uint64_t seed,
                    const std::vector<std::string>& outputs) {
  json manifest;
  manifest["command"] = command;
  manifest["config"] = resolved;
  manifest["seed"] = seed;
  manifest["threads"] = options.threads;
  manifest["versions"] = {{"precal", kVersion}};
  manifest["outputs"] = outputs;
  manifest["started"] = timestamp_utc();
  write_atomic(join_path(options.out_dir, "manifest.json"), manifest.dump(2) + "\n");
}

std::string pit_csv(std::span<const double> pits) {
  std::string out = "pit\n";
  for (double v : pits) {
    out += format_double(v);
    out += '\n';
  }
  return out;
}

// Null-distribution gates for PIT samples of (possibly) different sizes; the
// distribution is reused across pre-ranks with the same sample count.
class NullGates {
 public:
  NullGates(std::size_t replicates, std::size_t grid_size, std::size_t discretization,
            std::uint64_t seed, int threads)
      : replicates_(replicates),
        grid_(diagnostics::quantile_grid(grid_size)),
        discretization_(discretization),
        seed_(seed),
        threads_(threads) {}

  const diagnostics::NullDistribution& for_count(std::size_t n) {
    auto it = cache_.find(n);
    if (it == cache_.end())
      it = cache_
               .emplace(n, diagnostics::null_distribution(n, grid_, replicates_,
                                                          discretization_, seed_, kNullSalt,
                                                          threads_))
               .first;
    return it->second;
  }

  std::span<const double> grid() const { return grid_; }

 private:
  std::size_t replicates_;
  Vector grid_;
  std::size_t discretization_;
  std::uint64_t seed_;
  int threads_;
  std::map<std::size_t, diagnostics::NullDistribution> cache_;
};

json gate_entry(const std::string& name, std::span<const double> pits, NullGates& gates) {
  const double pce = diagnostics::pce(pits, gates.grid());
  const auto& null = gates.for_count(pits.size());
  const double q95 = null.quantile(0.95);
  const double q99 = null.quantile(0.99);
  return json{{"prerank", name},     {"n_pits", pits.size()}, {"pce", pce},
              {"null_q95", q95},     {"null_q99", q99},       {"pass_q95", pce <= q95},
              {"pass_q99", pce <= q99}};
}

// ---- simulate ---------------------------------------------------------------

scenarios::ExpCovSpec parse_scenario(const json& j) {
  scenarios::ExpCovSpec spec;
  const std::string kind = req<std::string>(j, "kind");
  if (kind == "index") {
    spec.kind = scenarios::ExpCovSpec::Kind::kIndex;
    spec.dim = opt<std::size_t>(j, "dim", 10);
  } else if (kind == "grid") {
    spec.kind = scenarios::ExpCovSpec::Kind::kGrid;
    spec.rows = opt<std::size_t>(j, "rows", 5);
    spec.cols = opt<std::size_t>(j, "cols", 5);
    spec.axis_scale = opt<double>(j, "axis_scale", 1.0);
  } else {
    throw ConfigError("scenario kind must be 'index' or 'grid', got '" + kind + "'");
  }
  spec.sigma2 = opt<double>(j, "sigma2", 1.0);
  spec.length = opt<double>(j, "length", 1.0);
  return spec;
}

json scenario_json(const scenarios::ExpCovSpec& spec) {
  json j;
  if (spec.kind == scenarios::ExpCovSpec::Kind::kIndex) {
    j["kind"] = "index";
    j["dim"] = spec.dim;
  } else {
    j["kind"] = "grid";
    j["rows"] = spec.rows;
    j["cols"] = spec.cols;
    j["axis_scale"] = spec.axis_scale;
  }
  j["sigma2"] = spec.sigma2;
  j["length"] = spec.length;
  return j;
}

scenarios::MisspecSpec parse_misspec(const json& j) {
  const std::string kind = req<std::string>(j, "kind");
  if (kind == "none") return scenarios::MisspecSpec::none();
  if (kind == "mean_bias")
    return scenarios::MisspecSpec::mean_bias(opt<double>(j, "delta", 0.5));
  if (kind == "variance_scale")
    return scenarios::MisspecSpec::variance_scale(opt<double>(j, "factor", 1.75));
  if (kind == "range_change")
    return scenarios::MisspecSpec::range_change(opt<double>(j, "length", 0.3));
  if (kind == "spectrum_scramble")
    return scenarios::MisspecSpec::spectrum_scramble(opt<double>(j, "gamma", 1.0));
  if (kind == "pca_structure")
    return scenarios::MisspecSpec::pca_structure(opt<double>(j, "c", 2.0),
                                                 opt<std::size_t>(j, "k", 1));
  if (kind == "isotropy")
    return scenarios::MisspecSpec::isotropy(opt<double>(j, "alpha", 5.0));
  if (kind == "pc_anisotropy_flip")
    return scenarios::MisspecSpec::pc_anisotropy_flip(opt<double>(j, "a", 2.0),
                                                      opt<std::size_t>(j, "k", 1),
                                                      opt<bool>(j, "rotation", true));
  throw ConfigError("unknown misspecification kind '" + kind + "'");
}

json misspec_json(const scenarios::MisspecSpec& m) {
  using Kind = scenarios::MisspecSpec::Kind;
  switch (m.kind) {
    case Kind::kNone:
      return json{{"kind", "none"}};
    case Kind::kMeanBias:
      return json{{"kind", "mean_bias"}, {"delta", m.delta}};
    case Kind::kVarianceScale:
      return json{{"kind", "variance_scale"}, {"factor", m.c_var}};
    case Kind::kRangeChange:
      return json{{"kind", "range_change"}, {"length", m.new_length}};
    case Kind::kSpectrumScramble:
      return json{{"kind", "spectrum_scramble"}, {"gamma", m.gamma}};
    case Kind::kPcaStructure:
      return json{{"kind", "pca_structure"}, {"c", m.c}, {"k", m.k}};
    case Kind::kIsotropy:
      return json{{"kind", "isotropy"}, {"alpha", m.alpha}};
    case Kind::kPcAnisotropyFlip:
      return json{{"kind", "pc_anisotropy_flip"}, {"a", m.a}, {"k", m.k},
                  {"rotation", m.rotation}};
  }
  throw ConfigError("invalid misspecification kind");
}

void simulate_body(const std::string& config_path, const CommonOptions& options) {
  const json cfg = parse_config(config_path);

  scenarios::SimulationConfig sim;
  sim.true_spec = parse_scenario(cfg.contains("scenario") ? cfg.at("scenario")
                                                          : json{{"kind", "index"}});
  sim.misspec = cfg.contains("misspec") ? parse_misspec(cfg.at("misspec"))
                                        : scenarios::MisspecSpec::none();
  sim.cases = opt<std::size_t>(cfg, "cases", 10000);
  sim.ensemble = opt<std::size_t>(cfg, "ensemble", 20);
  sim.copula_pool = opt<std::size_t>(cfg, "copula_pool", 2000);
  sim.seed = options.seed.value_or(opt<std::uint64_t>(cfg, "seed", 1));
  sim.threads = static_cast<std::size_t>(options.threads);
  const std::vector<std::string> prerank_names =
      req<std::vector<std::string>>(cfg, "preranks");
  sim.preranks = parse_preranks(prerank_names);
  const std::size_t grid_size = opt<std::size_t>(cfg, "grid_size", 100);
  const std::size_t null_replicates = opt<std::size_t>(cfg, "null_replicates", 5000);

  json resolved;
  resolved["scenario"] = scenario_json(sim.true_spec);
  resolved["misspec"] = misspec_json(sim.misspec);
  resolved["cases"] = sim.cases;
  resolved["ensemble"] = sim.ensemble;
  resolved["copula_pool"] = sim.copula_pool;
  resolved["seed"] = sim.seed;
  resolved["preranks"] = prerank_names;
  resolved["grid_size"] = grid_size;
  resolved["null_replicates"] = null_replicates;

  std::vector<std::string> outputs = {"report.json"};
  for (const auto& p : sim.preranks) outputs.push_back("pits_" + sanitize(p.name()) + ".csv");
  write_manifest(options, "simulate", resolved, sim.seed, outputs);

  const scenarios::SimulationRun run = scenarios::run_simulation(sim);

  NullGates gates(null_replicates, grid_size, sim.ensemble, sim.seed, options.threads);
  json entries = json::array();
  for (std::size_t p = 0; p < run.preranks.size(); ++p) {
    const std::string name = run.preranks[p].name();
    write_atomic(join_path(options.out_dir, "pits_" + sanitize(name) + ".csv"),
                 pit_csv(run.pits[p]));
    entries.push_back(gate_entry(name, run.pits[p], gates));
  }
  json report;
  report["cases"] = run.cases;
  report["ensemble"] = run.ensemble;
  report["preranks"] = entries;
  write_atomic(join_path(options.out_dir, "report.json"), report.dump(2) + "\n");
}

// ---- train ------------------------------------------------------------------

struct DataConfig {
  std::string path;
  std::vector<std::string> targets;
  std::array<double, 3> split = {0.8, 0.1, 0.1};
  std::uint64_t seed = 1;
};

DataConfig parse_data_config(const json& j) {
  DataConfig d;
  d.path = req<std::string>(j, "path");
  d.targets = req<std::vector<std::string>>(j, "targets");
  const auto split = opt<std::vector<double>>(j, "split", {0.8, 0.1, 0.1});
  if (split.size() != 3)
    throw ConfigError("'split' must have exactly 3 fractions");
  d.split = {split[0], split[1], split[2]};
  d.seed = opt<std::uint64_t>(j, "seed", 1);
  return d;
}

json data_json(const DataConfig& d) {
  return json{{"path", d.path},
              {"targets", d.targets},
              {"split", {d.split[0], d.split[1], d.split[2]}},
              {"seed", d.seed}};
}

Dataset load_with_warnings(const DataConfig& d) {
  std::vector<std::string> warnings;
  Dataset ds = load_dataset(d.path, d.targets, d.split, d.seed, &warnings);
  for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
  return ds;
}

std::string trace_csv(const training::TrainedModel& result,
                      const std::vector<std::string>& prerank_names) {
  std::string out = "epoch,train_loss,val_nll";
  for (const std::string& name : prerank_names) out += ",val_pce_" + sanitize(name);
  out += ",val_es\n";
  for (std::size_t e = 0; e < result.trace.size(); ++e) {
    const auto& tr = result.trace[e];
    out += std::to_string(e) + "," + format_double(tr.train_loss) + "," +
           format_double(tr.val_nll);
    for (std::size_t p = 0; p < prerank_names.size(); ++p)
      out += "," + (p < tr.val_pce.size() ? format_double(tr.val_pce[p]) : std::string("nan"));
    out += "," + format_double(tr.val_es) + "\n";
  }
  return out;
}

void train_body(const std::string& config_path, const CommonOptions& options) {
  const json cfg = parse_config(config_path);
  const DataConfig data_cfg = parse_data_config(
      cfg.contains("data") ? cfg.at("data")
                           : throw ConfigError("missing section 'data'"));

  const json model_j = cfg.contains("model") ? cfg.at("model") : json::object();
  const json train_j = cfg.contains("train") ? cfg.at("train") : json::object();

  training::TrainConfig tc;
  tc.lambda = opt<double>(train_j, "lambda", 0.0);
  tc.tau = opt<double>(train_j, "tau", 100.0);
  tc.tau_cop = opt<double>(train_j, "tau_cop", 100.0);
  tc.p = opt<double>(train_j, "p", 1.0);
  tc.grid_size = opt<std::size_t>(train_j, "grid_size", 100);
  tc.ensemble = opt<std::size_t>(train_j, "ensemble", 100);
  tc.batch_size = opt<std::size_t>(train_j, "batch_size", 512);
  tc.epochs = opt<std::size_t>(train_j, "epochs", 100);
  tc.learning_rate = opt<double>(train_j, "learning_rate", 1e-4);
  tc.beta1 = opt<double>(train_j, "beta1", 0.9);
  tc.beta2 = opt<double>(train_j, "beta2", 0.999);
  tc.eps_adam = opt<double>(train_j, "eps_adam", 1e-8);
  const auto prerank_names = opt<std::vector<std::string>>(train_j, "preranks", {});
  tc.preranks = parse_preranks(prerank_names);
  tc.prerank_weights = opt<std::vector<double>>(train_j, "prerank_weights", {});
  tc.seed = options.seed.value_or(opt<std::uint64_t>(train_j, "seed", 1));
  tc.threads = static_cast<std::size_t>(options.threads);
  tc.grad_shards = opt<std::size_t>(train_j, "grad_shards", 16);
  tc.full_set_regularizer = opt<bool>(train_j, "full_set_regularizer", false);
  tc.val_ensemble = opt<std::size_t>(train_j, "val_ensemble", 100);
  tc.copula_pool = opt<std::size_t>(train_j, "copula_pool", 2000);
  const auto lambda_grid = opt<std::vector<double>>(train_j, "lambda_grid", {});

  json resolved;
  resolved["data"] = data_json(data_cfg);
  resolved["model"] = {{"components", opt<std::size_t>(model_j, "components", 5)},
                       {"hidden", opt<std::vector<std::size_t>>(model_j, "hidden",
                                                                {100, 100, 100})},
                       {"diagonal_covariance", opt<bool>(model_j, "diagonal_covariance",
                                                         false)}};
  resolved["train"] = {{"lambda", tc.lambda},
                       {"lambda_grid", lambda_grid},
                       {"tau", tc.tau},
                       {"tau_cop", tc.tau_cop},
                       {"p", tc.p},
                       {"grid_size", tc.grid_size},
                       {"ensemble", tc.ensemble},
                       {"batch_size", tc.batch_size},
                       {"epochs", tc.epochs},
                       {"learning_rate", tc.learning_rate},
                       {"beta1", tc.beta1},
                       {"beta2", tc.beta2},
                       {"eps_adam", tc.eps_adam},
                       {"preranks", prerank_names},
                       {"prerank_weights", tc.prerank_weights},
                       {"seed", tc.seed},
                       {"grad_shards", tc.grad_shards},
                       {"full_set_regularizer", tc.full_set_regularizer},
                       {"val_ensemble", tc.val_ensemble},
                       {"copula_pool", tc.copula_pool}};

  std::vector<std::string> outputs = {"checkpoint.json", "trace.csv"};
  if (!lambda_grid.empty()) outputs.push_back("lambda.json");
  write_manifest(options, "train", resolved, tc.seed, outputs);

  const Dataset ds = load_with_warnings(data_cfg);
  model::ModelConfig mcfg;
  mcfg.input_dim = ds.feature_names.size();
  mcfg.target_dim = ds.target_names.size();
  mcfg.components = opt<std::size_t>(model_j, "components", 5);
  mcfg.hidden = opt<std::vector<std::size_t>>(model_j, "hidden", {100, 100, 100});
  mcfg.diagonal_covariance = opt<bool>(model_j, "diagonal_covariance", false);

  const training::TrainData train_split = ds.train();
  const training::TrainData val_split = ds.val();

  training::TrainedModel result;
  if (!lambda_grid.empty()) {
    training::LambdaSelection sel =
        training::select_lambda(mcfg, train_split, val_split, tc, lambda_grid);
    json candidates = json::array();
    for (const auto& c : sel.candidates)
      candidates.push_back({{"lambda", c.lambda},
                            {"val_pce", c.val_pce},
                            {"val_es", c.val_es},
                            {"feasible", c.feasible}});
    const json lambda_report = {{"chosen", sel.chosen},
                                {"constraint_slack", sel.constraint_slack},
                                {"candidates", candidates}};
    write_atomic(join_path(options.out_dir, "lambda.json"), lambda_report.dump(2) + "\n");
    result = std::move(sel.model);
  } else {
    result = training::train(mcfg, train_split, val_split, tc);
  }

  save_checkpoint(join_path(options.out_dir, "checkpoint.json"), mcfg, result.params,
                  tc.seed);
  write_atomic(join_path(options.out_dir, "trace.csv"), trace_csv(result, prerank_names));
}

// ---- evaluate ---------------------------------------------------------------

void evaluate_body(const std::string& config_path, const CommonOptions& options) {
  const json cfg = parse_config(config_path);
  const std::string checkpoint_path = req<std::string>(cfg, "checkpoint");
  const DataConfig data_cfg = parse_data_config(
      cfg.contains("data") ? cfg.at("data")
                           : throw ConfigError("missing section 'data'"));
  const json eval_j = cfg.contains("eval") ? cfg.at("eval") : json::object();

  const Checkpoint ckpt = load_checkpoint(checkpoint_path);

  training::EvalConfig ec;
  const auto prerank_names = opt<std::vector<std::string>>(eval_j, "preranks", {});
  ec.preranks = parse_preranks(prerank_names);
  ec.ensemble = opt<std::size_t>(eval_j, "ensemble", 100);
  ec.copula_pool = opt<std::size_t>(eval_j, "copula_pool", 2000);
  ec.tau_cop = opt<double>(eval_j, "tau_cop", 100.0);
  // default to the training seed so a train -> evaluate round trip reproduces
  // the trace metrics exactly
  ec.seed = options.seed.value_or(opt<std::uint64_t>(eval_j, "seed", ckpt.train_seed));
  ec.threads = static_cast<std::size_t>(options.threads);
  const std::string split = opt<std::string>(eval_j, "split", "test");
  const std::size_t grid_size = opt<std::size_t>(eval_j, "grid_size", 100);
  const std::size_t null_replicates = opt<std::size_t>(eval_j, "null_replicates", 2000);

  json resolved;
  resolved["checkpoint"] = checkpoint_path;
  resolved["data"] = data_json(data_cfg);
  resolved["eval"] = {{"preranks", prerank_names}, {"ensemble", ec.ensemble},
                      {"copula_pool", ec.copula_pool}, {"tau_cop", ec.tau_cop},
                      {"seed", ec.seed},             {"split", split},
                      {"grid_size", grid_size},      {"null_replicates", null_replicates}};

  std::vector<std::string> outputs = {"report.json"};
  for (const auto& p : ec.preranks) outputs.push_back("pits_" + sanitize(p.name()) + ".csv");
  write_manifest(options, "evaluate", resolved, ec.seed, outputs);

  const Dataset ds = load_with_warnings(data_cfg);
  if (ds.feature_names.size() != ckpt.config.input_dim)
    throw ConfigError("evaluate: dataset has " + std::to_string(ds.feature_names.size()) +
                      " features but the checkpoint expects " +
                      std::to_string(ckpt.config.input_dim));
  if (ds.target_names.size() != ckpt.config.target_dim)
    throw ConfigError("evaluate: dataset has " + std::to_string(ds.target_names.size()) +
                      " targets but the checkpoint expects " +
                      std::to_string(ckpt.config.target_dim));

  training::TrainData eval_split;
  if (split == "train")
    eval_split = ds.train();
  else if (split == "val")
    eval_split = ds.val();
  else if (split == "test")
    eval_split = ds.test();
  else
    throw ConfigError("'split' must be train, val or test, got '" + split + "'");
  if (eval_split.size() == 0)
    throw ConfigError("evaluate: the requested split '" + split + "' is empty");

  const training::EvalReport er =
      training::evaluate_model(ckpt.config, ckpt.params.values(), eval_split, ec);

  NullGates gates(null_replicates, grid_size, ec.ensemble, ec.seed, options.threads);
  json entries = json::array();
  for (std::size_t p = 0; p < ec.preranks.size(); ++p) {
    const std::string name = ec.preranks[p].name();
    write_atomic(join_path(options.out_dir, "pits_" + sanitize(name) + ".csv"),
                 pit_csv(er.pits[p]));
    entries.push_back(gate_entry(name, er.pits[p], gates));
  }
  json report;
  report["split"] = split;
  report["cases"] = eval_split.size();
  report["nll"] = er.nll;
  report["energy_score"] = er.energy;
  report["preranks"] = entries;
  write_atomic(join_path(options.out_dir, "report.json"), report.dump(2) + "\n");
}

// ---- nulldist ----------------------------------------------------------------

void nulldist_body(const std::string& config_path, const CommonOptions& options) {
  const json cfg = parse_config(config_path);
  const std::size_t n = req<std::size_t>(cfg, "n");
  const std::size_t grid_size = opt<std::size_t>(cfg, "grid_size", 100);
  const std::size_t replicates = opt<std::size_t>(cfg, "replicates", 1000);
  std::optional<std::size_t> discretization;
  if (cfg.contains("discretization") && !cfg.at("discretization").is_null())
    discretization = req<std::size_t>(cfg, "discretization");
  const std::uint64_t seed = options.seed.value_or(opt<std::uint64_t>(cfg, "seed", 1));

  json resolved;
  resolved["n"] = n;
  resolved["grid_size"] = grid_size;
  resolved["replicates"] = replicates;
  resolved["discretization"] = discretization ? json(*discretization) : json(nullptr);
  resolved["seed"] = seed;
  write_manifest(options, "nulldist", resolved, seed,
                 {"null_statistics.csv", "null_quantiles.csv"});

  const Vector grid = diagnostics::quantile_grid(grid_size);
  const diagnostics::NullDistribution null = diagnostics::null_distribution(
      n, grid, replicates, discretization, seed, kNullSalt, options.threads);

  std::string stats = "statistic\n";
  for (double v : null.statistics) {
    stats += format_double(v);
    stats += '\n';
  }
  write_atomic(join_path(options.out_dir, "null_statistics.csv"), stats);

  std::string quantiles = "level,value\n";
  for (double level : {0.5, 0.9, 0.95, 0.99}) {
    quantiles += format_double(level);
    quantiles += ',';
    quantiles += format_double(null.quantile(level));
    quantiles += '\n';
  }
  write_atomic(join_path(options.out_dir, "null_quantiles.csv"), quantiles);
}

}  // namespace

int cmd_simulate(const std::string& config_path, const CommonOptions& options) {
  return guarded([&] { simulate_body(config_path, options); });
}

int cmd_train(const std::string& config_path, const CommonOptions& options) {
  return guarded([&] { train_body(config_path, options); });
}

int cmd_evaluate(const std::string& config_path, const CommonOptions& options) {
  return guarded([&] { evaluate_body(config_path, options); });
}

int cmd_nulldist(const std::string& config_path, const CommonOptions& options) {
  return guarded([&] { nulldist_body(config_path, options); });
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"pre-rank calibration diagnostics and regularized training"};
  app.require_subcommand(1);

  std::string config_path;
  CommonOptions options;
  std::uint64_t seed_value = 0;

  struct SubEntry {
    CLI::App* sub;
    int (*fn)(const std::string&, const CommonOptions&);
  };
  std::vector<SubEntry> entries;
  const std::pair<const char*, int (*)(const std::string&, const CommonOptions&)> table[] = {
      {"simulate", &cmd_simulate},
      {"train", &cmd_train},
      {"evaluate", &cmd_evaluate},
      {"nulldist", &cmd_nulldist}};
  for (const auto& [name, fn] : table) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " command");
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", options.out_dir, "output directory");
    sub->add_option("--seed", seed_value, "override the seed in the config");
    sub->add_option("--threads", options.threads, "worker threads");
    entries.push_back({sub, fn});
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: config: " << one_line(e.what()) << "\n";
    return 2;
  }

  for (const auto& entry : entries) {
    if (entry.sub->parsed()) {
      if (entry.sub->count("--seed") > 0) options.seed = seed_value;
      return entry.fn(config_path, options);
    }
  }
  std::cerr << "error: config: no subcommand given\n";
  return 2;
}

}  // namespace precal::cli
