#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sfgmkl/error.hpp"
#include "sfgmkl/kernel_dict.hpp"

using namespace sfgmkl;

TEST_CASE("default dictionary spans 1e-2 to 1e2") {
  const auto dict = default_dictionary();
  REQUIRE(dict.size() == 41);
  CHECK(dict.front().index == 1);
  CHECK(dict.front().sigma == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(dict[20].sigma == 1.0);
  CHECK(dict.back().sigma == doctest::Approx(100.0).epsilon(1e-14));
  for (std::size_t i = 1; i < dict.size(); ++i) CHECK(dict[i].sigma > dict[i - 1].sigma);
}

TEST_CASE("invalid bandwidths are rejected") {
  const std::vector<double> bad{1.0, 0.0};
  CHECK_THROWS_AS(make_dictionary(bad), ValidationError);
  CHECK_THROWS_AS(validate(KernelSpec{1, -2.0}), ValidationError);
  CHECK_THROWS_AS(validate(KernelSpec{1, INFINITY}), ValidationError);
}

TEST_CASE("eval_kernel values") {
  const KernelSpec unit{1, 1.0};
  const std::vector<double> zero{0.0, 0.0};
  CHECK(eval_kernel(unit, zero) == 1.0);
  const std::vector<double> one{1.0};
  CHECK(eval_kernel(unit, one) == doctest::Approx(0.6065306597126334).epsilon(1e-15));

  // Narrowest kernel: exp(-5000) is far below the smallest subnormal.
  const KernelSpec narrow = default_dictionary().front();
  const double v = eval_kernel(narrow, one);
  const long double exact = std::exp(-1.0L / (2.0L * 0.01L * 0.01L));
  CHECK(v >= 0.0);
  CHECK(v <= 1e-300);
  CHECK(exact > 0.0L);
  CHECK(exact < 1e-2000L);
  CHECK(std::abs(static_cast<long double>(v) - exact) < 1e-300L);
}

TEST_CASE("kernel is bounded in (0, 1]") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const KernelSpec k{1, 2.0};
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> rho{g(rng), g(rng), g(rng)};
    const double v = eval_kernel(k, rho);
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("sample_spectral determinism and errors") {
  const KernelSpec k{4, 0.5};
  Rng a(42), b(42);
  const FeatureMap m1 = sample_spectral(k, 50, 3, a);
  const FeatureMap m2 = sample_spectral(k, 50, 3, b);
  CHECK(m1 == m2);
  CHECK(m1.kernel_index() == 4);
  CHECK(m1.num_rf() == 50);
  CHECK(m1.input_dim() == 3);
  CHECK(m1.feature_dim() == 100);
  CHECK(m1.spectral_sample(7).size() == 3);
  Rng c(1);
  CHECK_THROWS_AS(sample_spectral(k, 0, 3, c), ValidationError);
}

TEST_CASE("sample_dictionary gives each kernel an independent stream") {
  const auto dict = default_dictionary();
  const auto maps = sample_dictionary(dict, 10, 2, 9);
  const auto again = sample_dictionary(dict, 10, 2, 9);
  CHECK(maps == again);
  const std::vector<double> sig{dict[4].sigma};
  auto single = make_dictionary(sig);
  single[0].index = 5;
  const auto alone = sample_dictionary(single, 10, 2, 9);
  CHECK(alone[0] == maps[4]);
  CHECK_FALSE(sample_dictionary(dict, 10, 2, 10)[4] == maps[4]);
}

TEST_CASE("spectral samples: CLT mean and variance") {
  Rng rng(2024);
  const std::size_t n = 100000;
  {
    const FeatureMap m = sample_spectral(KernelSpec{1, 1.0}, n, 2, rng);
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0;
      for (std::size_t j = 0; j < n; ++j) mean += m.psi(c, j);
      mean /= static_cast<double>(n);
      CHECK(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(n)));
    }
  }
  {
    const FeatureMap m = sample_spectral(KernelSpec{1, 2.0}, n, 2, rng);
    for (std::size_t c = 0; c < 2; ++c) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        mean += m.psi(c, j);
        sq += m.psi(c, j) * m.psi(c, j);
      }
      mean /= static_cast<double>(n);
      const double var = sq / static_cast<double>(n) - mean * mean;
      CHECK(std::abs(var - 0.25) <= 0.05 * 0.25);
    }
  }
}

TEST_CASE("rf_features layout and norm") {
  Rng rng(5);
  const FeatureMap m = sample_spectral(KernelSpec{1, 1.0}, 50, 3, rng);
  const std::vector<double> origin(3, 0.0);
  const auto z0 = m.features(origin);
  for (std::size_t j = 0; j < 50; ++j) {
    CHECK(z0[j] == 0.0);
    CHECK(z0[50 + j] == doctest::Approx(1.0 / std::sqrt(50.0)).epsilon(1e-15));
  }
  std::normal_distribution<double> g(0.0, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::vector<double> x{g(rng), g(rng), g(rng)};
    const auto z = m.features(x);
    double sq = 0.0;
    for (double v : z) sq += v * v;
    CHECK(std::abs(sq - 1.0) <= 1e-12);
    // Matches the definition evaluated directly.
    for (std::size_t j = 0; j < 50; j += 7) {
      double angle = 0.0;
      for (std::size_t c = 0; c < 3; ++c) angle += m.psi(c, j) * x[c];
      CHECK(z[j] == doctest::Approx(std::sin(angle) / std::sqrt(50.0)).epsilon(1e-12));
      CHECK(z[50 + j] == doctest::Approx(std::cos(angle) / std::sqrt(50.0)).epsilon(1e-12));
    }
  }
  const std::vector<double> wrong(2, 0.0);
  CHECK_THROWS_AS(m.features(wrong), ValidationError);
}

TEST_CASE("rf inner product estimates the kernel without bias") {
  const KernelSpec k{1, 1.0};
  const std::vector<double> x{0.3, -0.2};
  const std::vector<double> xp{0.3 + 0.6, -0.2 + 0.8};  // |x - x'| = 1
  const std::size_t reps = 200;
  double sum = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng(1000 + r);
    const FeatureMap m = sample_spectral(k, 50, 2, rng);
    const auto a = m.features(x);
    const auto b = m.features(xp);
    double dot = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
    CHECK(std::abs(dot) <= 1.0 + 1e-12);
    sum += dot;
  }
  const double mean = sum / static_cast<double>(reps);
  CHECK(std::abs(mean - std::exp(-0.5)) <= 3.0 / std::sqrt(200.0 * 50.0));
}

TEST_CASE("kernel_loss examples") {
  PerKernelModel zero(4);
  const std::vector<double> z{0.5, 0.5, 0.5, 0.5};
  CHECK(kernel_loss(zero, z, 0.0, 0.0) == 0.0);
  CHECK(kernel_loss(zero, z, 0.5, 0.0) == 0.25);

  // theta.z = 1 + sqrt(0.7), y = 0, lambda |theta|^2 small: raw ~ 1.7 + ...
  PerKernelModel big(4);
  const double s = (1.0 + std::sqrt(0.7)) / 2.0;
  for (double& t : big.theta) t = s;
  std::vector<double> grad(4, 9.0);
  const LossEval e = kernel_loss_with_gradient(big, z, 0.0, 1e-3, grad);
  CHECK(e.raw > 1.7);
  CHECK(e.clipped);
  CHECK(e.value == 1.0);
  CHECK(kernel_loss(big, z, 0.0, 1e-3) == 1.0);
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("analytic gradient matches finite differences") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 0.3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double lambda = 1e-3;
  int checked = 0;
  while (checked < 20) {
    PerKernelModel m(6);
    for (double& t : m.theta) t = g(rng);
    std::vector<double> z(6);
    for (double& v : z) v = g(rng);
    const double y = u(rng);
    auto raw = [&](const std::vector<double>& th) {
      double p = 0.0, sq = 0.0;
      for (std::size_t k = 0; k < 6; ++k) {
        p += th[k] * z[k];
        sq += th[k] * th[k];
      }
      return (p - y) * (p - y) + lambda * sq;
    };
    std::vector<double> grad(6);
    const LossEval e = kernel_loss_with_gradient(m, z, y, lambda, grad);
    if (e.clipped) continue;  // zero gradient there, covered above
    ++checked;
    for (std::size_t k = 0; k < 6; ++k) {
      auto plus = m.theta, minus = m.theta;
      const double h = 1e-6;
      plus[k] += h;
      minus[k] -= h;
      const double fd = (raw(plus) - raw(minus)) / (2.0 * h);
      CHECK(std::abs(fd - grad[k]) <= 1e-6 * std::max(1.0, std::abs(grad[k])));
    }
  }
}

TEST_CASE("model dimension is fixed") {
  PerKernelModel m(100);
  CHECK(m.theta.size() == 100);
  std::vector<double> z(100, 0.1), grad(100);
  kernel_loss_with_gradient(m, z, 0.3, 0.0, grad);
  CHECK(m.theta.size() == 100);
  std::vector<double> short_z(99);
  CHECK_THROWS_AS(kernel_loss_with_gradient(m, short_z, 0.3, 0.0, grad), ValidationError);
}
