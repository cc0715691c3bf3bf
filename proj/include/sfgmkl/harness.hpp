#pragma once

// Experiment orchestration: repeated runs over feature-map seeds, MSE curves,
// timings, comparison tables and the files the CLI writes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfgmkl/data_io.hpp"
#include "sfgmkl/kernel_dict.hpp"
#include "sfgmkl/online_learner.hpp"

namespace sfgmkl {

enum class Algorithm { sfg_mkl, sfg_mkl_r, full_dictionary, hindsight };

std::string to_string(Algorithm a);
/// "sfg-mkl", "sfg-mkl-r", "full-dictionary" or "hindsight".
Algorithm parse_algorithm(const std::string& name);

struct ExperimentConfig {
  Algorithm algorithm = Algorithm::sfg_mkl;

  /// Manifest dataset name, or "synthetic".
  std::string dataset = "airfoil";
  std::filesystem::path manifest = "data/manifest.json";
  StreamConfig stream;
  SyntheticSpec synthetic;
  std::size_t synthetic_horizon = 2000;

  /// Unset eta / xi default to 1/sqrt(T) once T is known.
  std::optional<double> eta;
  std::optional<double> xi;
  std::size_t num_rf = 50;
  std::size_t out_degree = 5;
  double lambda = 1e-3;
  std::size_t beta_rank = 10;
  std::size_t exploit_after = 300;

  std::vector<double> sigmas;  // empty: the default 41-kernel dictionary

  std::size_t repeats = 10;
  std::uint64_t seed = 1;  // repeat r (1-based) uses feature-map seed seed + r
  std::size_t threads = 0;  // 0: hardware concurrency
  /// Also fit the hindsight oracle per repeat and report the regret curve.
  bool with_regret = false;
  /// NDJSON per-round trace of the first repeat.
  std::optional<std::filesystem::path> trace;
};

void validate(const ExperimentConfig& config);

struct RepeatResult {
  std::uint64_t seed = 0;
  std::vector<double> predictions;
  double online_seconds = 0.0;
  std::vector<double> regret;  // empty unless with_regret
  std::size_t hindsight_kernel = 0;  // 1-based, 0 when not fitted
  std::size_t beta_above_inverse_n = 0;
};

struct ExperimentResult {
  ExperimentConfig config;
  Hyperparams hyperparams;  // as resolved for the stream length
  std::string dataset_name;
  std::string dataset_provenance;
  std::string dataset_hash;
  std::size_t horizon = 0;
  std::size_t input_dim = 0;
  std::vector<double> targets;
  std::vector<RepeatResult> repeats;
  /// MSE_t = (1/R) sum_r (1/t) sum_{tau <= t} (yhat_tau - y_tau)^2.
  std::vector<double> mse;
  std::vector<double> mean_regret;  // empty unless with_regret
  double graph_seconds = 0.0;
  double mean_online_seconds = 0.0;

  double final_mse() const { return mse.empty() ? 0.0 : mse.back(); }
};

/// Normalized, stream-configured data the experiment will run on.
Dataset prepare_dataset(const ExperimentConfig& config);
Hyperparams resolve_hyperparams(const ExperimentConfig& config, std::size_t horizon);

ExperimentResult run_experiment(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& data);

/// Running mean of squared errors for one prediction series.
std::vector<double> mse_curve(std::span<const double> predictions, std::span<const double> targets);

struct ComparisonRow {
  std::string algorithm;
  double final_mse = 0.0;
  double online_seconds = 0.0;
  double graph_seconds = 0.0;
};

struct ComparisonReport {
  std::string dataset;
  std::size_t horizon = 0;
  std::vector<ComparisonRow> rows;
  std::vector<ExperimentResult> results;
  /// speed_ratio[i][j] = online seconds of row i / row j.
  std::vector<std::vector<double>> speed_ratio;
};

/// Runs every config on one shared stream. Configs must agree on dataset,
/// stream settings, seeds and repeats.
ComparisonReport compare(const std::vector<ExperimentConfig>& configs);

void write_comparison_table(std::ostream& out, const ComparisonReport& report);
void write_comparison_json(std::ostream& out, const ComparisonReport& report);

/// Result as JSON. Timings are the only nondeterministic fields; omit them
/// for byte-identical files.
void write_result_json(std::ostream& out, const ExperimentResult& result, bool include_timing = true);
/// CSV "t,mse,algorithm", one row per round per result.
void emit_plot_data(std::ostream& out, const std::vector<const ExperimentResult*>& results);

/// Edge list of the dictionary's feedback graph; returns the graph's edge count.
std::size_t dump_graph(const KernelDictionary& dict, std::size_t out_degree, std::size_t input_dim,
                       std::ostream& out);

struct RegretBenchConfig {
  SyntheticSpec synthetic;
  std::vector<std::size_t> horizons{1000, 2000, 4000, 8000};
  std::size_t seeds = 10;
  std::uint64_t base_seed = 1;
  std::vector<Algorithm> algorithms{Algorithm::sfg_mkl, Algorithm::sfg_mkl_r};
  std::size_t out_degree = 5;
  double lambda = 1e-3;
  std::size_t beta_rank = 10;
  std::size_t exploit_after = 0;
  std::size_t threads = 0;
};

struct RegretBenchRow {
  Algorithm algorithm = Algorithm::sfg_mkl;
  std::vector<double> mean_regret;  // per horizon, averaged over seeds
  double slope = 0.0;               // least-squares slope of log regret on log T
};

/// Final regret against the hindsight oracle on realizable synthetic streams
/// at each horizon, with eta = xi = 1/sqrt(T).
std::vector<RegretBenchRow> bench_regret(const RegretBenchConfig& config);
/// Least-squares slope of log(y) on log(x); nonpositive y are an error.
double log_log_slope(std::span<const double> x, std::span<const double> y);

}  // namespace sfgmkl
