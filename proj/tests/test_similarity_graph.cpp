#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "sfgmkl/error.hpp"
#include "sfgmkl/similarity_graph.hpp"

using namespace sfgmkl;

namespace {

KernelDictionary grid(std::vector<double> sigmas) { return make_dictionary(sigmas); }

// Smallest dominating set by exhaustive search over all subsets.
std::size_t brute_force_domination(const FeedbackGraph& g) {
  const std::size_t n = g.size();
  std::size_t best = n;
  for (unsigned mask = 1; mask < (1u << n); ++mask) {
    const auto size = static_cast<std::size_t>(__builtin_popcount(mask));
    if (size >= best) continue;
    NodeSet set;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) set.push_back(i);
    }
    if (is_dominating(g, set)) best = size;
  }
  return best;
}

FeedbackGraph random_graph(std::size_t n, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution edge(density);
  std::vector<NodeSet> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && edge(rng)) out[i].push_back(j);
    }
  }
  return FeedbackGraph(out);
}

}  // namespace

TEST_CASE("closed form: identical kernels and symmetry") {
  const KernelSpec a{1, 1.0}, b{2, 2.0};
  CHECK(delta_closed_form(a, a, 3) == 0.0);
  CHECK(delta_closed_form(a, b, 2) == delta_closed_form(b, a, 2));
  CHECK(delta_numeric(a, a, 2) <= 1e-10);
}

TEST_CASE("closed form for sigma 1 vs 2 in one dimension") {
  const KernelSpec a{1, 1.0}, b{2, 2.0};
  const double closed = delta_closed_form(a, b, 1);
  // sqrt(pi) (1 + 2) - 2 sqrt(2 pi * 4 / 5)
  const double direct = std::sqrt(M_PI) * 3.0 - 2.0 * std::sqrt(2.0 * M_PI * 4.0 / 5.0);
  CHECK(closed == doctest::Approx(direct).epsilon(1e-13));
  CHECK(closed == doctest::Approx(0.83336).epsilon(1e-4));
  const double numeric = delta_numeric(a, b, 1);
  CHECK(std::abs(numeric - closed) <= 1e-6 * closed);
  QuadratureOptions radial;
  radial.layout = QuadratureOptions::Layout::radial;
  CHECK(std::abs(delta_numeric(a, b, 1, radial) - closed) <= 1e-6 * closed);
}

TEST_CASE("closed form tracks quadrature in two and three dimensions") {
  const KernelSpec a{1, 0.5}, b{2, 1.7};
  for (std::size_t d : {2u, 3u}) {
    const double closed = delta_closed_form(a, b, d);
    QuadratureOptions radial;
    radial.layout = QuadratureOptions::Layout::radial;
    CHECK(std::abs(delta_numeric(a, b, d, radial) - closed) <= 1e-6 * closed);
  }
  for (std::size_t d : {2u, 3u}) {
    CHECK(std::abs(delta_numeric(a, b, d) - delta_closed_form(a, b, d)) <= 1e-6 * delta_closed_form(a, b, d));
  }
  // A 250x bandwidth gap on the nested rule.
  const KernelSpec narrow{1, 0.01}, wide{2, 2.5};
  CHECK(std::abs(delta_numeric(narrow, wide, 2) - delta_closed_form(narrow, wide, 2)) <=
        1e-6 * delta_closed_form(narrow, wide, 2));
}

TEST_CASE("quadrature monotonicity spot check") {
  const KernelSpec base{1, 1.0}, near{2, 1.1}, far{3, 3.0};
  CHECK(delta_numeric(base, near, 2) < delta_numeric(base, far, 2));
}

TEST_CASE("extreme bandwidths stay finite in log space") {
  const KernelSpec lo{1, 0.01}, hi{41, 100.0};
  const double ld = log_delta_closed_form(lo, hi, 15);
  CHECK(std::isfinite(ld));
  CHECK(ld == doctest::Approx(7.5 * std::log(M_PI) + 15.0 * std::log(100.0)).epsilon(1e-6));
  CHECK(std::isinf(log_delta_closed_form(lo, lo, 5)));
  CHECK_THROWS_AS(delta_closed_form(lo, hi, 400), NumericalError);
  CHECK_THROWS_AS(delta_numeric(lo, hi, 4), ValidationError);
}

TEST_CASE("delta is monotone in log-bandwidth distance on each side") {
  const auto dict = default_dictionary();
  for (std::size_t d : {1u, 2u, 5u}) {
    const SimilarityMatrix sim(dict, d);
    for (std::size_t i = 0; i < dict.size(); ++i) {
      CHECK(sim.delta(i, i) == 0.0);
      for (std::size_t j = i + 1; j < dict.size(); ++j) {
        CHECK(sim.delta(i, j) > 0.0);
        CHECK(sim.delta(i, j) == sim.delta(j, i));
        if (j + 1 < dict.size()) CHECK(sim.log_delta(i, j) < sim.log_delta(i, j + 1));
      }
      // Toward narrower partners Delta saturates at |kappa_i|^2, so neighbours can tie in double.
      for (std::size_t j = i; j-- > 1;) CHECK(sim.log_delta(i, j - 1) >= sim.log_delta(i, j));
    }
  }
}

TEST_CASE("delta is not monotone in log-distance across sides") {
  // A wider neighbour k steps away can be farther than a narrower one k+1 away.
  const auto dict = default_dictionary();
  const SimilarityMatrix sim(dict, 1);
  CHECK(sim.delta(20, 23) > sim.delta(20, 16));
}

TEST_CASE("build_graph invariants on the default dictionary") {
  const auto dict = default_dictionary();
  const FeedbackGraph g = build_graph(dict, 5, 1);
  REQUIRE(g.size() == 41);
  CHECK(g.edge_count() == 41 * 5);
  for (std::size_t i = 0; i < 41; ++i) {
    CHECK(g.out_neighbors(i).size() == 5);
    CHECK(g.has_edge(i, i));
    CHECK(std::is_sorted(g.out_neighbors(i).begin(), g.out_neighbors(i).end()));
  }
  CHECK(g.thresholds().size() == 41);
  CHECK(is_dominating(g, g.dominating_set()));
  CHECK_THROWS_AS(build_graph(dict, 0, 1), ValidationError);
  CHECK_THROWS_AS(build_graph(dict, 42, 1), ValidationError);
}

TEST_CASE("graph extremes") {
  const auto dict = default_dictionary();
  const FeedbackGraph complete = build_graph(dict, 41, 2);
  CHECK(complete.edge_count() == 1681);
  CHECK(complete.dominating_set() == NodeSet{0});
  const FeedbackGraph loops = build_graph(dict, 1, 2);
  CHECK(loops.edge_count() == 41);
  CHECK(loops.dominating_set().size() == 41);
}

TEST_CASE("five-kernel grid neighbours follow the quadrature ranking") {
  const auto dict = grid({0.1, 0.3, 1.0, 3.0, 10.0});
  const FeedbackGraph g = build_graph(dict, 3, 1);
  // Rank the others by quadrature, include the node itself.
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t j = 0; j < 5; ++j) ranked.push_back({j == 2 ? 0.0 : delta_numeric(dict[2], dict[j], 1), j});
  std::sort(ranked.begin(), ranked.end());
  NodeSet expected{ranked[0].second, ranked[1].second, ranked[2].second};
  std::sort(expected.begin(), expected.end());
  CHECK(g.out_neighbors(2) == expected);
  CHECK(g.thresholds()[2] == doctest::Approx(ranked[2].first).epsilon(1e-6));
}

TEST_CASE("gamma is the M-th smallest delta") {
  const auto dict = default_dictionary();
  const SimilarityMatrix sim(dict, 3);
  const FeedbackGraph g = build_graph(sim, 4);
  for (std::size_t i = 0; i < dict.size(); ++i) {
    std::vector<double> row;
    for (std::size_t j = 0; j < dict.size(); ++j) row.push_back(sim.delta(i, j));
    std::sort(row.begin(), row.end());
    CHECK(g.thresholds()[i] == row[3]);
    for (std::size_t j : g.out_neighbors(i)) CHECK(sim.delta(i, j) <= row[3]);
  }
}

TEST_CASE("greedy dominating set on hand graphs") {
  FeedbackGraph star({{1, 2, 3}, {}, {}, {}});
  CHECK(star.dominating_set() == NodeSet{0});
  // Ties go to the lowest index.
  FeedbackGraph pairs({{1}, {0}, {3}, {2}});
  CHECK(pairs.dominating_set() == NodeSet{0, 2});
  CHECK(is_dominating(pairs, pairs.dominating_set()));
  const NodeSet not_dom{0};
  CHECK_FALSE(is_dominating(pairs, not_dom));
}

TEST_CASE("greedy is within the logarithmic factor of optimal") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> size(2, 10);
  std::uniform_real_distribution<double> dens(0.05, 0.6);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = size(rng);
    const FeedbackGraph g = random_graph(n, dens(rng), rng);
    const NodeSet greedy = greedy_dominating_set(g);
    CHECK(greedy == g.dominating_set());
    CHECK(is_dominating(g, greedy));
    const std::size_t opt = brute_force_domination(g);
    CHECK(static_cast<double>(greedy.size()) <= (1.0 + std::log(static_cast<double>(n))) * static_cast<double>(opt));
  }
}

TEST_CASE("refine_edges examples") {
  const auto dict = default_dictionary();
  const SimilarityMatrix sim(dict, 1);
  const FeedbackGraph complete = build_graph(sim, 41);
  const RefinedEdgeSet none = refine_edges(complete, {5}, sim);
  CHECK(none.extra_edges().empty());

  const FeedbackGraph loops = build_graph(sim, 1);
  const RefinedEdgeSet star = refine_edges(loops, {2}, sim);
  CHECK(star.extra_edges().size() == 40);
  for (const auto& [from, to] : star.extra_edges()) {
    CHECK(from == 2);
    CHECK(to != 2);
  }
  CHECK(star.out_neighbors(2).size() == 41);
  CHECK(star.in_neighbors(7) == NodeSet{2, 7});
  CHECK_THROWS_AS(refine_edges(loops, {}, sim), ValidationError);
}

TEST_CASE("six-kernel grid orphans join the nearer end") {
  const auto dict = grid({0.1, 0.25, 0.6, 1.5, 4.0, 10.0});
  const SimilarityMatrix sim(dict, 1);
  const FeedbackGraph g = build_graph(sim, 1);
  const RefinedEdgeSet r = refine_edges(g, {0, 5}, sim);
  CHECK(r.extra_edges().size() == 4);
  for (const auto& [from, to] : r.extra_edges()) {
    const double to_first = delta_numeric(dict[to], dict[0], 1);
    const double to_last = delta_numeric(dict[to], dict[5], 1);
    CHECK(from == (to_first <= to_last ? 0u : 5u));
  }
}

TEST_CASE("refined graph is dominated by its set") {
  const auto dict = default_dictionary();
  const SimilarityMatrix sim(dict, 2);
  const FeedbackGraph g = build_graph(sim, 5);
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    NodeSet d;
    for (std::size_t i = 0; i < 41; ++i) {
      if (rng() % 7 == 0) d.push_back(i);
    }
    if (d.empty()) d.push_back(rng() % 41);
    const RefinedEdgeSet r = refine_edges(g, d, sim);
    for (const auto& [from, to] : r.extra_edges()) {
      for (std::size_t m : d) CHECK_FALSE(g.has_edge(m, to));
      CHECK(std::binary_search(d.begin(), d.end(), from));
    }
    for (std::size_t i = 0; i < 41; ++i) {
      const NodeSet in = r.in_neighbors(i);
      bool hit = false;
      for (std::size_t j : in) hit = hit || std::binary_search(d.begin(), d.end(), j);
      CHECK(hit);
    }
  }
}

TEST_CASE("lemma 2 examples") {
  const KernelSpec a{1, 1.0}, b{2, 2.0};
  const std::vector<double> pts{-0.5, 0.1, 0.8};
  const std::vector<double> alpha{0.3, -0.7, 0.9};
  const Lemma2Check same = verify_lemma2_bound(a, a, pts, alpha, alpha);
  CHECK(same.lhs == doctest::Approx(0.0));
  CHECK(same.holds);
  const std::vector<double> beta{-0.2, 0.5, 0.4};
  const Lemma2Check diff = verify_lemma2_bound(a, b, pts, alpha, beta);
  CHECK(diff.lhs > 0.0);
  CHECK(diff.holds);
  const std::vector<double> outside{1.5};
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(verify_lemma2_bound(a, b, outside, one, one), ValidationError);
}

TEST_CASE("edge list text") {
  const auto dict = default_dictionary();
  const SimilarityMatrix sim(dict, 1);
  const FeedbackGraph g = build_graph(sim, 5);
  std::ostringstream out;
  write_edge_list(out, g, sim);
  std::istringstream in(out.str());
  std::string line;
  std::size_t edges = 0;
  std::vector<std::size_t> out_degree(42, 0);
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::size_t i = 0, j = 0;
    double delta = -1.0;
    fields >> i >> j >> delta;
    REQUIRE(i >= 1);
    REQUIRE(i <= 41);
    CHECK(delta == doctest::Approx(sim.delta(i - 1, j - 1)));
    ++out_degree[i];
    ++edges;
  }
  CHECK(edges == 205);
  for (std::size_t i = 1; i <= 41; ++i) CHECK(out_degree[i] == 5);
  CHECK(out.str().find("# dominating") != std::string::npos);
}
