#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "sfgmkl/baselines.hpp"
#include "sfgmkl/data_io.hpp"
#include "sfgmkl/error.hpp"
#include "sfgmkl/online_learner.hpp"

using namespace sfgmkl;

namespace {

SyntheticStream make_stream(std::size_t kernel, double noise, std::size_t dim, std::size_t num_rf,
                            std::uint64_t seed, std::size_t horizon) {
  SyntheticSpec spec;
  spec.kernel_index = kernel;
  spec.noise_std = noise;
  spec.input_dim = dim;
  spec.num_rf = num_rf;
  return synthetic_stream(spec, default_dictionary(), seed, horizon);
}

}  // namespace

TEST_CASE("full dictionary with one kernel is plain OGD") {
  const auto dict = make_dictionary(std::vector<double>{1.3});
  const auto maps = sample_dictionary(dict, 15, 2, 3);
  const auto stream = make_stream(21, 0.05, 2, 15, 3, 150);
  const auto pred = run_full_dictionary(stream.data.view(), maps, 0.1, 1e-3);
  PerKernelModel m(30);
  std::vector<double> grad(30);
  for (std::size_t t = 0; t < 150; ++t) {
    const auto z = maps[0].features(stream.data.view().row(t));
    CHECK(std::abs(pred[t] - m.predict(z)) <= 1e-12);
    kernel_loss_with_gradient(m, z, stream.data.targets[t], 1e-3, grad);
    for (std::size_t k = 0; k < 30; ++k) m.theta[k] -= 0.1 * grad[k];
  }
}

TEST_CASE("full dictionary matches the graph learner on the complete graph") {
  const auto dict = default_dictionary();
  const auto stream = make_stream(21, 0.0, 3, 50, 11, 100);
  const auto maps = sample_dictionary(dict, 50, 3, 11);
  const SimilarityMatrix sim(dict, 3);
  const FeedbackGraph complete = build_graph(sim, 41);
  Hyperparams hp = default_hyperparams(100);
  hp.freeze_node_weights = true;
  OnlineLearner graph_learner(maps, complete, &sim, hp, 5);
  FullDictionaryLearner full(maps, hp.eta, hp.lambda);
  for (std::size_t t = 0; t < 100; ++t) {
    const auto x = stream.data.view().row(t);
    const double a = graph_learner.step(x, stream.data.targets[t]).prediction;
    const double b = full.step(x, stream.data.targets[t]);
    CHECK(a == b);
  }
}

TEST_CASE("hindsight recovers a realizable target") {
  // Kernel 23 is wide enough in d=4 that no target needs clipping.
  const auto stream = make_stream(23, 0.0, 4, 50, 21, 400);
  const auto maps = sample_dictionary(default_dictionary(), 50, 4, 21);
  const auto oracle = fit_hindsight(stream.data.view(), maps, 0.0);
  CHECK(oracle.best == 22);
  const auto pred = oracle.predict(stream.data.view(), maps);
  double mse = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    const double e = pred[t] - stream.data.targets[t];
    mse += e * e;
  }
  mse /= static_cast<double>(pred.size());
  CHECK(stream.clipped_targets == 0);
  CHECK(mse <= 1e-10);
}

TEST_CASE("hindsight shrinks to zero under a huge penalty") {
  const auto stream = make_stream(21, 0.05, 2, 10, 2, 100);
  const auto maps = sample_dictionary(default_dictionary(), 10, 2, 2);
  const auto oracle = fit_hindsight(stream.data.view(), maps, 1e12);
  for (const auto& th : oracle.theta) {
    for (double v : th) CHECK(std::abs(v) < 1e-9);
  }
}

TEST_CASE("closed-form ridge matches gradient descent to convergence") {
  const auto dict = make_dictionary(std::vector<double>{0.8});
  const auto maps = sample_dictionary(dict, 10, 2, 8);
  const auto stream = make_stream(21, 0.1, 2, 10, 8, 200);
  const double lambda = 1e-3;
  const auto oracle = fit_hindsight(stream.data.view(), maps, lambda);
  // Gradient descent on (1/T) [sum (theta.z - y)^2 + lambda T |theta|^2].
  const Eigen::MatrixXd z = feature_matrix(stream.data.view(), maps[0]);
  const Eigen::Map<const Eigen::VectorXd> y(stream.data.targets.data(), 200);
  const double T = 200.0;
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(20);
  const Eigen::MatrixXd h = (z.transpose() * z) / T + lambda * Eigen::MatrixXd::Identity(20, 20);
  const Eigen::VectorXd b = (z.transpose() * y) / T;
  const double step = 1.0 / h.operatorNorm();
  for (int it = 0; it < 200000; ++it) {
    const Eigen::VectorXd g = h * theta - b;
    theta -= step * g;
    if (g.norm() < 1e-13) break;
  }
  for (Eigen::Index k = 0; k < 20; ++k) CHECK(std::abs(theta[k] - oracle.theta[0][static_cast<std::size_t>(k)]) <= 1e-4);
}

TEST_CASE("hindsight is permutation invariant") {
  const auto stream = make_stream(21, 0.05, 3, 20, 4, 300);
  const auto maps = sample_dictionary(default_dictionary(), 20, 3, 4);
  StreamConfig shuffle;
  shuffle.shuffle_seed = 99;
  const Dataset permuted = apply_stream_config(stream.data, shuffle);
  const auto a = fit_hindsight(stream.data.view(), maps, 1e-3);
  const auto b = fit_hindsight(permuted.view(), maps, 1e-3);
  CHECK(a.best == b.best);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    for (std::size_t k = 0; k < a.theta[i].size(); ++k) CHECK(std::abs(a.theta[i][k] - b.theta[i][k]) <= 1e-10);
  }
}

TEST_CASE("singular normal equations fall back to the pseudo-inverse") {
  // Two identical rows and lambda = 0 leave the 2D x 2D system rank deficient.
  const auto dict = make_dictionary(std::vector<double>{1.0});
  const auto maps = sample_dictionary(dict, 5, 1, 1);
  const std::vector<double> x{0.3, 0.3};
  const std::vector<double> y{0.4, 0.4};
  const StreamView view{x, y, 1};
  const auto oracle = fit_hindsight(view, maps, 0.0);
  CHECK(oracle.used_pseudo_inverse[0]);
  const auto pred = oracle.predict(view, maps);
  CHECK(pred[0] == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("regret curve") {
  const std::vector<double> y{0.1, 0.5, 0.9};
  const std::vector<double> o{0.2, 0.4, 0.8};
  const auto zero = regret_curve(o, o, y);
  for (double v : zero) CHECK(v == 0.0);
  const std::vector<double> l{0.3};
  const std::vector<double> o1{0.1};
  const std::vector<double> y1{0.0};
  CHECK(regret_curve(l, o1, y1)[0] == doctest::Approx(0.09 - 0.01));
  CHECK_THROWS_AS(regret_curve(l, o, y), ValidationError);
}

TEST_CASE("full dictionary round cost grows with the dictionary") {
  const auto stream = make_stream(21, 0.05, 5, 50, 1, 200);
  auto time_for = [&](std::size_t n) {
    std::vector<double> sig(n);
    for (std::size_t i = 0; i < n; ++i) sig[i] = std::pow(10.0, -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n));
    const auto maps = sample_dictionary(make_dictionary(sig), 50, 5, 1);
    double best = INFINITY;
    for (int rep = 0; rep < 5; ++rep) {
      const auto start = std::chrono::steady_clock::now();
      run_full_dictionary(stream.data.view(), maps, 0.05, 1e-3);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    return best;
  };
  const double small = time_for(8);
  const double large = time_for(40);
  MESSAGE("N=8: " << small << " s, N=40: " << large << " s, ratio " << large / small);
  // Linear scaling gives 5x; allow 20% timing noise.
  CHECK(large / small >= 5.0 * 0.8);
}
