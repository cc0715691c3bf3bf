// sfgmkl: run, compare and inspect online multi-kernel regression experiments.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sfgmkl/error.hpp"
#include "sfgmkl/harness.hpp"
#include "sfgmkl/simd.hpp"

namespace {

using namespace sfgmkl;

struct ExperimentOptions {
  std::string algorithm = "sfg-mkl";
  std::string dataset = "airfoil";
  std::string manifest = "data/manifest.json";
  std::uint64_t seed = 1;
  std::size_t repeats = 10;
  std::size_t threads = 0;
  std::size_t horizon = 0;
  std::uint64_t shuffle_seed = 0;
  double eta = 0.0;
  double xi = 0.0;
  std::size_t num_rf = 50;
  std::size_t out_degree = 5;
  double lambda = 1e-3;
  std::size_t beta_rank = 10;
  std::size_t exploit_after = 300;
  std::size_t synthetic_kernel = 21;
  double synthetic_noise = 0.0;
  std::size_t synthetic_dim = 5;
  std::size_t synthetic_horizon = 2000;
  bool with_regret = false;
  std::string trace;

  CLI::Option* horizon_opt = nullptr;
  CLI::Option* shuffle_opt = nullptr;
  CLI::Option* eta_opt = nullptr;
  CLI::Option* xi_opt = nullptr;
};

void add_experiment_options(CLI::App* app, ExperimentOptions& o) {
  app->add_option("--dataset", o.dataset, "Manifest dataset name, or 'synthetic'")->capture_default_str();
  app->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->capture_default_str();
  app->add_option("--seed", o.seed, "Base seed; repeat r (from 1) uses seed + r")->capture_default_str();
  app->add_option("--repeats", o.repeats, "Feature-map seeds to average over")->capture_default_str();
  app->add_option("--threads", o.threads, "Worker threads (0: all cores)")->capture_default_str();
  o.horizon_opt = app->add_option("--horizon", o.horizon, "Truncate the stream to this many rounds");
  o.shuffle_opt = app->add_option("--shuffle-seed", o.shuffle_seed, "Shuffle the stream with this seed");
  o.eta_opt = app->add_option("--eta", o.eta, "Learning rate (default 1/sqrt(T))");
  o.xi_opt = app->add_option("--xi", o.xi, "Exploration rate (default 1/sqrt(T))");
  app->add_option("--num-rf", o.num_rf, "Random features per kernel")->capture_default_str();
  app->add_option("--out-degree", o.out_degree, "Out-degree of the feedback graph")->capture_default_str();
  app->add_option("--lambda", o.lambda, "Ridge penalty")->capture_default_str();
  app->add_option("--beta-rank", o.beta_rank, "Node-weight rank that sets beta")->capture_default_str();
  app->add_option("--exploit-after", o.exploit_after, "Switch to the heaviest node after this round (0: never)")
      ->capture_default_str();
  app->add_option("--synthetic-kernel", o.synthetic_kernel, "Generating kernel (1-based)")->capture_default_str();
  app->add_option("--synthetic-noise", o.synthetic_noise, "Target noise std")->capture_default_str();
  app->add_option("--synthetic-dim", o.synthetic_dim, "Input dimension")->capture_default_str();
  app->add_option("--synthetic-horizon", o.synthetic_horizon, "Stream length")->capture_default_str();
  app->add_flag("--with-regret", o.with_regret, "Fit the hindsight oracle and report regret");
  app->add_option("--trace", o.trace, "NDJSON per-round trace of the first repeat");
}

ExperimentConfig to_config(const ExperimentOptions& o, const std::string& algorithm) {
  ExperimentConfig c;
  c.algorithm = parse_algorithm(algorithm);
  c.dataset = o.dataset;
  c.manifest = o.manifest;
  c.seed = o.seed;
  c.repeats = o.repeats;
  c.threads = o.threads;
  if (o.horizon_opt->count() > 0) c.stream.horizon = o.horizon;
  if (o.shuffle_opt->count() > 0) c.stream.shuffle_seed = o.shuffle_seed;
  if (o.eta_opt->count() > 0) c.eta = o.eta;
  if (o.xi_opt->count() > 0) c.xi = o.xi;
  c.num_rf = o.num_rf;
  c.out_degree = o.out_degree;
  c.lambda = o.lambda;
  c.beta_rank = o.beta_rank;
  c.exploit_after = o.exploit_after;
  c.synthetic.kernel_index = o.synthetic_kernel;
  c.synthetic.noise_std = o.synthetic_noise;
  c.synthetic.input_dim = o.synthetic_dim;
  c.synthetic_horizon = o.synthetic_horizon;
  c.with_regret = o.with_regret;
  if (!o.trace.empty()) c.trace = o.trace;
  return c;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ValidationError(what + ": '" + item + "' is not a nonnegative integer");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online multi-kernel regression over similarity feedback graphs"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run one algorithm over R feature-map seeds");
  run->set_config("--config", "", "Flat key = value configuration file");
  run->allow_config_extras(CLI::config_extras_mode::error);
  ExperimentOptions run_opts;
  add_experiment_options(run, run_opts);
  run->add_option("--algorithm", run_opts.algorithm, "sfg-mkl, sfg-mkl-r, full-dictionary or hindsight")
      ->capture_default_str();
  std::string run_out;
  std::string run_plot;
  bool omit_timing = false;
  run->add_option("--out", run_out, "Result JSON path");
  run->add_option("--plot", run_plot, "Plot CSV path (t,mse,algorithm)");
  run->add_flag("--omit-timing", omit_timing, "Leave wall-clock fields out of the result JSON");

  // compare
  auto* cmp = app.add_subcommand("compare", "Run several algorithms on the same stream and seeds");
  cmp->set_config("--config", "", "Flat key = value configuration file");
  cmp->allow_config_extras(CLI::config_extras_mode::error);
  ExperimentOptions cmp_opts;
  add_experiment_options(cmp, cmp_opts);
  std::vector<std::string> algorithms{"sfg-mkl", "sfg-mkl-r", "full-dictionary"};
  cmp->add_option("--algorithms", algorithms, "Algorithms to compare")->delimiter(',')->capture_default_str();
  std::string cmp_out;
  std::string cmp_plot;
  cmp->add_option("--out", cmp_out, "Comparison JSON path");
  cmp->add_option("--plot", cmp_plot, "Plot CSV path (t,mse,algorithm)");

  // graph
  auto* graph = app.add_subcommand("graph", "Write the dictionary's feedback graph as an edge list");
  graph->set_config("--config", "", "Flat key = value configuration file");
  graph->allow_config_extras(CLI::config_extras_mode::error);
  std::size_t graph_m = 5;
  std::size_t graph_dim = 1;
  std::string graph_out;
  graph->add_option("--m", graph_m, "Out-degree M")->capture_default_str();
  graph->add_option("--dim", graph_dim, "Input dimension d used by the similarity")->capture_default_str();
  graph->add_option("--out", graph_out, "Edge list path (stdout when omitted)");

  // bench-regret
  auto* bench = app.add_subcommand("bench-regret", "Regret growth on realizable synthetic streams");
  bench->set_config("--config", "", "Flat key = value configuration file");
  bench->allow_config_extras(CLI::config_extras_mode::error);
  RegretBenchConfig bench_cfg;
  std::string horizons_text = "1000,2000,4000,8000";
  std::vector<std::string> bench_algorithms{"sfg-mkl", "sfg-mkl-r"};
  std::string bench_out;
  bench->add_option("--kernel-index", bench_cfg.synthetic.kernel_index, "Generating kernel (1-based)")
      ->capture_default_str();
  bench->add_option("--horizons", horizons_text, "Comma-separated horizons")->capture_default_str();
  bench->add_option("--seeds", bench_cfg.seeds, "Seeds per horizon")->capture_default_str();
  bench->add_option("--seed", bench_cfg.base_seed, "First seed")->capture_default_str();
  bench->add_option("--noise", bench_cfg.synthetic.noise_std, "Target noise std")->capture_default_str();
  bench->add_option("--dim", bench_cfg.synthetic.input_dim, "Input dimension")->capture_default_str();
  bench->add_option("--num-rf", bench_cfg.synthetic.num_rf, "Random features per kernel")->capture_default_str();
  bench->add_option("--out-degree", bench_cfg.out_degree, "Out-degree M")->capture_default_str();
  bench->add_option("--exploit-after", bench_cfg.exploit_after, "Exploitation switch (0: never)")
      ->capture_default_str();
  bench->add_option("--threads", bench_cfg.threads, "Worker threads (0: all cores)")->capture_default_str();
  bench->add_option("--algorithms", bench_algorithms, "Algorithms")->delimiter(',')->capture_default_str();
  bench->add_option("--out", bench_out, "Result JSON path");

  try {
    app.parse(argc, argv);
    // CLI11 reads config files only for the top-level app; options already
    // given on the command line are left alone.
    for (CLI::App* sub : app.get_subcommands()) {
      const CLI::Option* cfg = sub->get_option("--config");
      if (cfg->count() == 0) continue;
      const auto path = cfg->as<std::string>();
      std::ifstream in(path);
      if (!in) throw CLI::FileError::Missing(path);
      sub->parse_from_stream(in);
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::FileError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::io);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::validation);
  }

  try {
    if (*run) {
      const ExperimentResult result = run_experiment(to_config(run_opts, run_opts.algorithm));
      std::cout << to_string(result.config.algorithm) << " on " << result.dataset_name << ": T=" << result.horizon
                << " R=" << result.repeats.size() << " final MSE=" << result.final_mse()
                << " (normalized scale) online=" << result.mean_online_seconds
                << "s graph=" << result.graph_seconds << "s isa=" << simd::name(simd::active_isa()) << '\n';
      if (!run_out.empty()) {
        auto out = open_output(run_out);
        write_result_json(out, result, !omit_timing);
      }
      if (!run_plot.empty()) {
        auto out = open_output(run_plot);
        emit_plot_data(out, {&result});
      }
    } else if (*cmp) {
      std::vector<ExperimentConfig> configs;
      for (const auto& a : algorithms) configs.push_back(to_config(cmp_opts, a));
      const ComparisonReport report = compare(configs);
      write_comparison_table(std::cout, report);
      if (!cmp_out.empty()) {
        auto out = open_output(cmp_out);
        write_comparison_json(out, report);
      }
      if (!cmp_plot.empty()) {
        std::vector<const ExperimentResult*> ptrs;
        for (const auto& r : report.results) ptrs.push_back(&r);
        auto out = open_output(cmp_plot);
        emit_plot_data(out, ptrs);
      }
    } else if (*graph) {
      const auto dict = default_dictionary();
      if (graph_out.empty()) {
        dump_graph(dict, graph_m, graph_dim, std::cout);
      } else {
        auto out = open_output(graph_out);
        const std::size_t edges = dump_graph(dict, graph_m, graph_dim, out);
        std::cout << "wrote " << edges << " edges to " << graph_out << '\n';
      }
    } else if (*bench) {
      bench_cfg.horizons = parse_size_list(horizons_text, "horizons");
      bench_cfg.algorithms.clear();
      for (const auto& a : bench_algorithms) bench_cfg.algorithms.push_back(parse_algorithm(a));
      const auto rows = bench_regret(bench_cfg);
      nlohmann::json doc;
      doc["horizons"] = bench_cfg.horizons;
      doc["seeds"] = bench_cfg.seeds;
      doc["kernel_index"] = bench_cfg.synthetic.kernel_index;
      doc["noise"] = bench_cfg.synthetic.noise_std;
      doc["dim"] = bench_cfg.synthetic.input_dim;
      for (const auto& row : rows) {
        std::cout << to_string(row.algorithm) << ": slope=" << row.slope << " regret=";
        for (std::size_t k = 0; k < row.mean_regret.size(); ++k) {
          std::cout << (k ? "," : "") << row.mean_regret[k];
        }
        std::cout << '\n';
        doc["rows"].push_back({{"algorithm", to_string(row.algorithm)},
                               {"mean_regret", row.mean_regret},
                               {"slope", std::isfinite(row.slope) ? nlohmann::json(row.slope) : nlohmann::json()}});
      }
      if (!bench_out.empty()) {
        auto out = open_output(bench_out);
        out << doc.dump(2) << '\n';
      }
    }
  } catch (const Error& e) {
    std::cerr << "error[" << to_string(e.kind()) << "]: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
