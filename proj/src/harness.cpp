#include "sfgmkl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sfgmkl/baselines.hpp"
#include "sfgmkl/error.hpp"
#include "sfgmkl/similarity_graph.hpp"

namespace sfgmkl {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested;
  if (n == 0) n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(n, jobs));
}

/// Runs job(i) for i in [0, jobs) on a small pool. The first failure by job
/// index is rethrown after all workers stop.
void parallel_for(std::size_t jobs, std::size_t threads, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs) return;
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };
  const std::size_t n = worker_count(threads, jobs);
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (std::size_t k = 0; k < n; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

KernelDictionary dictionary_for(const ExperimentConfig& config) {
  return config.sigmas.empty() ? default_dictionary() : make_dictionary(config.sigmas);
}

bool is_graph_algorithm(Algorithm a) { return a == Algorithm::sfg_mkl || a == Algorithm::sfg_mkl_r; }

struct GraphBundle {
  std::optional<SimilarityMatrix> sim;
  std::optional<FeedbackGraph> graph;
};

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::sfg_mkl: return "sfg-mkl";
    case Algorithm::sfg_mkl_r: return "sfg-mkl-r";
    case Algorithm::full_dictionary: return "full-dictionary";
    case Algorithm::hindsight: return "hindsight";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (Algorithm a : {Algorithm::sfg_mkl, Algorithm::sfg_mkl_r, Algorithm::full_dictionary,
                      Algorithm::hindsight}) {
    if (to_string(a) == name) return a;
  }
  throw ValidationError("unknown algorithm '" + name +
                        "' (expected sfg-mkl, sfg-mkl-r, full-dictionary or hindsight)");
}

void validate(const ExperimentConfig& config) {
  if (config.repeats < 1) throw ValidationError("repeats must be >= 1");
  if (config.num_rf < 1) throw ValidationError("num-rf must be >= 1");
  if (config.dataset.empty()) throw ValidationError("dataset must be named");
  if (config.eta && !(*config.eta > 0.0)) throw ValidationError("eta must be positive");
  if (config.xi && !(*config.xi > 0.0 && *config.xi < 1.0)) throw ValidationError("xi must lie in (0, 1)");
  if (!(config.lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (config.dataset == "synthetic" && config.synthetic_horizon == 0) {
    throw ValidationError("synthetic horizon must be >= 1");
  }
}

Dataset prepare_dataset(const ExperimentConfig& config) {
  validate(config);
  if (config.dataset == "synthetic") {
    const auto dict = dictionary_for(config);
    SyntheticSpec spec = config.synthetic;
    spec.num_rf = config.num_rf;
    // Realizable for the first repeat, whose maps use seed + 1.
    auto stream = synthetic_stream(spec, dict, config.seed + 1, config.synthetic_horizon);
    return apply_stream_config(stream.data, config.stream);
  }
  return apply_stream_config(normalize(load_dataset(config.dataset, config.manifest)), config.stream);
}

Hyperparams resolve_hyperparams(const ExperimentConfig& config, std::size_t horizon) {
  Hyperparams hp = default_hyperparams(
      horizon, config.algorithm == Algorithm::sfg_mkl_r ? Variant::refined : Variant::plain);
  if (config.eta) hp.eta = *config.eta;
  if (config.xi) hp.xi = *config.xi;
  hp.num_rf = config.num_rf;
  hp.out_degree = config.out_degree;
  hp.lambda = config.lambda;
  hp.beta_rank = config.beta_rank;
  hp.exploit_after = config.exploit_after;
  return hp;
}

std::vector<double> mse_curve(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw ValidationError("mse: length mismatch");
  std::vector<double> out(targets.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const double e = predictions[t] - targets[t];
    acc += e * e;
    out[t] = acc / static_cast<double>(t + 1);
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  return run_experiment(config, prepare_dataset(config));
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& data) {
  validate(config);
  const StreamView stream = data.view();
  validate(stream);
  if (stream.size() == 0) throw ValidationError("experiment: empty stream");
  const auto dict = dictionary_for(config);
  const std::size_t n = dict.size();
  const std::size_t horizon = stream.size();
  const std::size_t d = stream.dim;

  ExperimentResult result;
  result.config = config;
  result.hyperparams = resolve_hyperparams(config, horizon);
  result.dataset_name = data.name;
  result.dataset_provenance = data.provenance;
  result.dataset_hash = content_hash(data);
  result.horizon = horizon;
  result.input_dim = d;
  result.targets = data.targets;
  const Hyperparams& hp = result.hyperparams;

  GraphBundle bundle;
  if (is_graph_algorithm(config.algorithm)) {
    validate(hp, n);
    const auto start = Clock::now();
    bundle.sim.emplace(dict, d);
    bundle.graph.emplace(build_graph(*bundle.sim, hp.out_degree));
    result.graph_seconds = seconds_since(start);
  }

  std::ofstream trace_file;
  if (config.trace) {
    trace_file.open(*config.trace);
    if (!trace_file) throw IoError("cannot open trace file " + config.trace->string());
  }

  result.repeats.resize(config.repeats);
  parallel_for(config.repeats, config.threads, [&](std::size_t r) {
    RepeatResult& rep = result.repeats[r];
    rep.seed = config.seed + r + 1;
    auto maps = sample_dictionary(dict, hp.num_rf, d, rep.seed);
    std::optional<HindsightOracle> oracle;
    rep.predictions.resize(horizon);

    switch (config.algorithm) {
      case Algorithm::sfg_mkl:
      case Algorithm::sfg_mkl_r: {
        OnlineLearner learner(maps, *bundle.graph, &*bundle.sim,
                              hp, splitmix64(rep.seed));
        if (r == 0 && trace_file.is_open()) learner.set_trace(&trace_file);
        const auto start = Clock::now();
        for (std::size_t t = 0; t < horizon; ++t) {
          rep.predictions[t] = learner.step(stream.row(t), stream.targets[t]).prediction;
        }
        rep.online_seconds = seconds_since(start);
        rep.beta_above_inverse_n = learner.beta_above_inverse_n();
        break;
      }
      case Algorithm::full_dictionary: {
        FullDictionaryLearner learner(maps, hp.eta, hp.lambda);
        const auto start = Clock::now();
        for (std::size_t t = 0; t < horizon; ++t) {
          rep.predictions[t] = learner.step(stream.row(t), stream.targets[t]);
        }
        rep.online_seconds = seconds_since(start);
        break;
      }
      case Algorithm::hindsight: {
        const auto start = Clock::now();
        oracle = fit_hindsight(stream, maps, hp.lambda);
        rep.predictions = oracle->predict(stream, maps);
        rep.online_seconds = seconds_since(start);
        break;
      }
    }
    if (config.with_regret) {
      if (!oracle) oracle = fit_hindsight(stream, maps, hp.lambda);
      rep.hindsight_kernel = oracle->best + 1;
      rep.regret = regret_curve(rep.predictions, oracle->predict(stream, maps), stream.targets);
    }
  });

  result.mse.assign(horizon, 0.0);
  if (config.with_regret) result.mean_regret.assign(horizon, 0.0);
  for (const auto& rep : result.repeats) {
    const auto curve = mse_curve(rep.predictions, stream.targets);
    for (std::size_t t = 0; t < horizon; ++t) result.mse[t] += curve[t];
    for (std::size_t t = 0; t < rep.regret.size(); ++t) result.mean_regret[t] += rep.regret[t];
    result.mean_online_seconds += rep.online_seconds;
  }
  const double inv_r = 1.0 / static_cast<double>(config.repeats);
  for (double& v : result.mse) v *= inv_r;
  for (double& v : result.mean_regret) v *= inv_r;
  result.mean_online_seconds *= inv_r;
  return result;
}

ComparisonReport compare(const std::vector<ExperimentConfig>& configs) {
  if (configs.empty()) throw ValidationError("compare: no configurations");
  const ExperimentConfig& first = configs.front();
  for (const auto& c : configs) {
    const bool same = c.dataset == first.dataset && c.manifest == first.manifest &&
                      c.stream.horizon == first.stream.horizon &&
                      c.stream.shuffle_seed == first.stream.shuffle_seed && c.seed == first.seed &&
                      c.repeats == first.repeats && c.num_rf == first.num_rf && c.sigmas == first.sigmas &&
                      (c.dataset != "synthetic" ||
                       (c.synthetic_horizon == first.synthetic_horizon &&
                        c.synthetic.kernel_index == first.synthetic.kernel_index &&
                        c.synthetic.noise_std == first.synthetic.noise_std &&
                        c.synthetic.input_dim == first.synthetic.input_dim));
    if (!same) {
      throw ValidationError("compare: configurations must share dataset, stream, seeds, repeats and dictionary");
    }
  }
  const Dataset data = prepare_dataset(first);
  ComparisonReport report;
  report.dataset = data.name;
  report.horizon = data.size();
  for (const auto& c : configs) {
    report.results.push_back(run_experiment(c, data));
    const auto& res = report.results.back();
    report.rows.push_back({to_string(c.algorithm), res.final_mse(), res.mean_online_seconds, res.graph_seconds});
  }
  const std::size_t k = report.rows.size();
  report.speed_ratio.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      const double den = report.rows[j].online_seconds;
      report.speed_ratio[i][j] =
          den > 0.0 ? report.rows[i].online_seconds / den : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return report;
}

void write_comparison_table(std::ostream& out, const ComparisonReport& report) {
  std::ostringstream s;
  s << "dataset: " << report.dataset << "  T=" << report.horizon
    << "  (MSE on min-max normalized targets)\n";
  s << std::left << std::setw(18) << "algorithm" << std::right << std::setw(14) << "MSE(x1e-3)"
    << std::setw(14) << "online(s)" << std::setw(12) << "graph(s)" << '\n';
  s << std::fixed;
  for (const auto& row : report.rows) {
    s << std::left << std::setw(18) << row.algorithm << std::right << std::setw(14)
      << std::setprecision(3) << row.final_mse * 1e3 << std::setw(14) << std::setprecision(4)
      << row.online_seconds << std::setw(12) << std::setprecision(4) << row.graph_seconds << '\n';
  }
  if (report.rows.size() > 1) {
    s << "speed ratio vs " << report.rows.front().algorithm << ":";
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
      s << "  " << report.rows[i].algorithm << "=" << std::setprecision(3) << report.speed_ratio[i][0];
    }
    s << '\n';
  }
  out << s.str();
}

void write_comparison_json(std::ostream& out, const ComparisonReport& report) {
  nlohmann::json doc;
  doc["dataset"] = report.dataset;
  doc["horizon"] = report.horizon;
  doc["mse_scale"] = "normalized targets in [0, 1]";
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    rows.push_back({{"algorithm", row.algorithm},
                    {"final_mse", row.final_mse},
                    {"online_seconds", row.online_seconds},
                    {"graph_seconds", row.graph_seconds}});
  }
  doc["rows"] = rows;
  nlohmann::json ratios = nlohmann::json::array();
  for (const auto& r : report.speed_ratio) {
    nlohmann::json line = nlohmann::json::array();
    for (double v : r) line.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
    ratios.push_back(line);
  }
  doc["speed_ratio"] = ratios;
  out << doc.dump(2) << '\n';
}

void write_result_json(std::ostream& out, const ExperimentResult& result, bool include_timing) {
  const auto& c = result.config;
  const auto& hp = result.hyperparams;
  nlohmann::json doc;
  nlohmann::json cfg;
  cfg["algorithm"] = to_string(c.algorithm);
  cfg["dataset"] = c.dataset;
  cfg["repeats"] = c.repeats;
  cfg["seed"] = c.seed;
  cfg["eta"] = hp.eta;
  cfg["xi"] = hp.xi;
  cfg["num_rf"] = hp.num_rf;
  cfg["out_degree"] = hp.out_degree;
  cfg["lambda"] = hp.lambda;
  cfg["beta_rank"] = hp.beta_rank;
  cfg["exploit_after"] = hp.exploit_after;
  cfg["kernels"] = c.sigmas.empty() ? kDefaultDictionarySize : c.sigmas.size();
  if (c.stream.horizon) cfg["horizon"] = *c.stream.horizon;
  if (c.stream.shuffle_seed) cfg["shuffle_seed"] = *c.stream.shuffle_seed;
  if (c.dataset == "synthetic") {
    cfg["synthetic_kernel"] = c.synthetic.kernel_index;
    cfg["synthetic_noise"] = c.synthetic.noise_std;
    cfg["synthetic_dim"] = c.synthetic.input_dim;
    cfg["synthetic_horizon"] = c.synthetic_horizon;
  }
  doc["config"] = cfg;
  doc["dataset"] = {{"name", result.dataset_name},
                    {"provenance", result.dataset_provenance},
                    {"content_sha256", result.dataset_hash},
                    {"rows", result.horizon},
                    {"dim", result.input_dim}};
  doc["mse_scale"] = "normalized targets in [0, 1]";
  doc["final_mse"] = result.final_mse();
  doc["mse"] = result.mse;
  if (!result.mean_regret.empty()) doc["regret"] = result.mean_regret;
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& rep : result.repeats) {
    nlohmann::json r;
    r["seed"] = rep.seed;
    r["predictions"] = rep.predictions;
    if (rep.hindsight_kernel > 0) r["hindsight_kernel"] = rep.hindsight_kernel;
    if (c.algorithm == Algorithm::sfg_mkl_r) r["beta_above_inverse_n"] = rep.beta_above_inverse_n;
    if (include_timing) r["online_seconds"] = rep.online_seconds;
    reps.push_back(std::move(r));
  }
  doc["repeats"] = reps;
  if (include_timing) {
    doc["timing"] = {{"graph_seconds", result.graph_seconds},
                     {"mean_online_seconds", result.mean_online_seconds}};
  }
  out << doc.dump(2) << '\n';
}

void emit_plot_data(std::ostream& out, const std::vector<const ExperimentResult*>& results) {
  std::ostringstream s;
  s << "t,mse,algorithm\n";
  s << std::setprecision(17);
  for (const ExperimentResult* r : results) {
    const std::string name = to_string(r->config.algorithm);
    for (std::size_t t = 0; t < r->mse.size(); ++t) s << (t + 1) << ',' << r->mse[t] << ',' << name << '\n';
  }
  out << s.str();
}

std::size_t dump_graph(const KernelDictionary& dict, std::size_t out_degree, std::size_t input_dim,
                       std::ostream& out) {
  const SimilarityMatrix sim(dict, input_dim);
  const FeedbackGraph graph = build_graph(sim, out_degree);
  write_edge_list(out, graph, sim);
  if (!out) throw IoError("graph: write failed");
  return graph.edge_count();
}

double log_log_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("slope: need >= 2 matched points");
  double mx = 0.0, my = 0.0;
  std::vector<double> lx(x.size()), ly(y.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) throw NumericalError("slope: log of a nonpositive value");
    lx[k] = std::log(x[k]);
    ly[k] = std::log(y[k]);
    mx += lx[k];
    my += ly[k];
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (lx[k] - mx) * (ly[k] - my);
    sxx += (lx[k] - mx) * (lx[k] - mx);
  }
  if (!(sxx > 0.0)) throw ValidationError("slope: horizons must differ");
  return sxy / sxx;
}

std::vector<RegretBenchRow> bench_regret(const RegretBenchConfig& config) {
  if (config.horizons.size() < 2) throw ValidationError("bench-regret: need >= 2 horizons");
  if (config.seeds < 1) throw ValidationError("bench-regret: seeds must be >= 1");
  if (config.algorithms.empty()) throw ValidationError("bench-regret: no algorithms");
  const auto dict = default_dictionary();
  const std::size_t h = config.horizons.size();
  const std::size_t a = config.algorithms.size();
  // regret[(hi * seeds + s) * a + ai]
  std::vector<double> regret(h * config.seeds * a, 0.0);

  const SimilarityMatrix sim(dict, config.synthetic.input_dim);
  const FeedbackGraph graph = build_graph(sim, config.out_degree);

  parallel_for(h * config.seeds, config.threads, [&](std::size_t job) {
    const std::size_t hi = job / config.seeds;
    const std::size_t s = job % config.seeds;
    const std::size_t horizon = config.horizons[hi];
    const std::uint64_t seed = config.base_seed + s;
    const auto stream = synthetic_stream(config.synthetic, dict, seed, horizon);
    const StreamView view = stream.data.view();
    const auto maps = sample_dictionary(dict, config.synthetic.num_rf, config.synthetic.input_dim, seed);
    const HindsightOracle oracle = fit_hindsight(view, maps, config.lambda);
    const auto oracle_pred = oracle.predict(view, maps);
    for (std::size_t ai = 0; ai < a; ++ai) {
      const Algorithm alg = config.algorithms[ai];
      Hyperparams hp = default_hyperparams(
          horizon, alg == Algorithm::sfg_mkl_r ? Variant::refined : Variant::plain);
      hp.num_rf = config.synthetic.num_rf;
      hp.out_degree = config.out_degree;
      hp.lambda = config.lambda;
      hp.beta_rank = config.beta_rank;
      hp.exploit_after = config.exploit_after;
      std::vector<double> pred(horizon);
      if (alg == Algorithm::full_dictionary) {
        pred = run_full_dictionary(view, maps, hp.eta, hp.lambda);
      } else if (alg == Algorithm::hindsight) {
        pred = oracle_pred;
      } else {
        OnlineLearner learner(maps, graph, &sim, hp, splitmix64(seed));
        for (std::size_t t = 0; t < horizon; ++t) pred[t] = learner.step(view.row(t), view.targets[t]).prediction;
      }
      regret[job * a + ai] = regret_curve(pred, oracle_pred, view.targets).back();
    }
  });

  std::vector<RegretBenchRow> rows(a);
  std::vector<double> xs(config.horizons.begin(), config.horizons.end());
  for (std::size_t ai = 0; ai < a; ++ai) {
    rows[ai].algorithm = config.algorithms[ai];
    rows[ai].mean_regret.assign(h, 0.0);
    for (std::size_t hi = 0; hi < h; ++hi) {
      for (std::size_t s = 0; s < config.seeds; ++s) {
        rows[ai].mean_regret[hi] += regret[(hi * config.seeds + s) * a + ai];
      }
      rows[ai].mean_regret[hi] /= static_cast<double>(config.seeds);
    }
    try {
      rows[ai].slope = log_log_slope(xs, rows[ai].mean_regret);
    } catch (const NumericalError&) {
      rows[ai].slope = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return rows;
}

}  // namespace sfgmkl
