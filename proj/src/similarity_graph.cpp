#include "sfgmkl/similarity_graph.hpp"

#include <algorithm>
#include <functional>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "sfgmkl/error.hpp"

namespace sfgmkl {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

// [(1 - r^{d/2})^2 + 2 r^{d/2} (1 - h^{d/2})] with r = s_min/s_max and
// h = 2 s_min s_max / (s_min^2 + s_max^2). Every term is non-negative, so the
// bracket never cancels.
double log_shape_factor(double s_min, double s_max, double half_dim) {
  const double r = s_min / s_max;
  const double log_r = std::log(r);
  const double r_half = std::exp(half_dim * log_r);
  const double one_minus_r_half = -std::expm1(half_dim * log_r);
  const double gap = (s_max - s_min) * (s_max - s_min) / (s_min * s_min + s_max * s_max);
  const double one_minus_h_half = -std::expm1(half_dim * std::log1p(-gap));
  return std::log(one_minus_r_half * one_minus_r_half + 2.0 * r_half * one_minus_h_half);
}

// (kappa_a - kappa_b)^2 at squared radius sq, as kappa_wide^2 (1 - e^{-c sq})^2.
struct SquaredDifference {
  double inv_wide;    // 1 / (2 s_max^2)
  double inv_gap;     // 1 / (2 s_min^2) - 1 / (2 s_max^2)

  SquaredDifference(double s_a, double s_b) {
    const double lo = std::min(s_a, s_b);
    const double hi = std::max(s_a, s_b);
    inv_wide = 1.0 / (2.0 * hi * hi);
    inv_gap = 1.0 / (2.0 * lo * lo) - inv_wide;
  }
  double operator()(double sq) const {
    const double wide = std::exp(-sq * inv_wide);
    const double diff = wide * -std::expm1(-sq * inv_gap);
    return diff * diff;
  }
};

using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;

// Integrates f over [0, radius] split at the given interior breakpoints.
template <class F>
double integrate_half_line(F&& f, std::span<const double> breaks, double radius,
                           const QuadratureOptions& opt, double* error_out) {
  double total = 0.0;
  double error = 0.0;
  double lo = 0.0;
  auto piece = [&](double a, double b) {
    double err = 0.0;
    total += Rule::integrate(f, a, b, opt.max_depth, opt.rel_tol, &err);
    error += err;
  };
  for (double b : breaks) {
    if (b > lo && b < radius) {
      piece(lo, b);
      lo = b;
    }
  }
  piece(lo, radius);
  if (error_out) *error_out = error;
  return total;
}

void check_quadrature(double value, double error, double rel_tol, const char* what) {
  if (!std::isfinite(value) || error > 1e3 * rel_tol * std::abs(value) + 1e-300) {
    throw NumericalError(std::string(what) + ": quadrature did not reach tolerance (estimate " +
                         std::to_string(value) + ", error " + std::to_string(error) + ")");
  }
}

}  // namespace

double log_delta_closed_form(const KernelSpec& a, const KernelSpec& b, std::size_t dim) {
  validate(a);
  validate(b);
  if (dim == 0) throw ValidationError("delta: dimension must be >= 1");
  if (a.sigma == b.sigma) return -std::numeric_limits<double>::infinity();
  const double s_min = std::min(a.sigma, b.sigma);
  const double s_max = std::max(a.sigma, b.sigma);
  const double half_dim = 0.5 * static_cast<double>(dim);
  // Delta = pi^{d/2} s_max^d * shape(r, h)
  return half_dim * std::log(std::numbers::pi) + static_cast<double>(dim) * std::log(s_max) +
         log_shape_factor(s_min, s_max, half_dim);
}

double delta_closed_form(const KernelSpec& a, const KernelSpec& b, std::size_t dim) {
  const double log_value = log_delta_closed_form(a, b, dim);
  const double value = std::exp(log_value);
  if (!std::isfinite(value)) {
    throw NumericalError("delta: value exp(" + std::to_string(log_value) +
                         ") exceeds double range");
  }
  return value;
}

double delta_numeric(const KernelSpec& a, const KernelSpec& b, std::size_t dim,
                     const QuadratureOptions& opt) {
  validate(a);
  validate(b);
  if (dim < 1 || dim > 3) throw ValidationError("delta_numeric: dimension must be 1, 2 or 3");
  if (a.sigma == b.sigma) return 0.0;
  const SquaredDifference integrand(a.sigma, b.sigma);
  const double s_min = std::min(a.sigma, b.sigma);
  const double s_max = std::max(a.sigma, b.sigma);
  // kappa^2 = exp(-rho^2 / s^2); at 7 s_max the remaining mass is below 1e-20.
  const double radius = 7.0 * s_max;
  // Geometric breakpoints from s_min to 4 s_max keep every piece smooth.
  std::vector<double> breaks;
  for (double b = s_min; b < 4.0 * s_max; b *= 2.0) breaks.push_back(b);
  breaks.push_back(4.0 * s_max);

  double error = 0.0;
  double value = 0.0;
  if (opt.layout == QuadratureOptions::Layout::radial) {
    const double dm1 = static_cast<double>(dim) - 1.0;
    auto radial = [&](double r) { return std::pow(r, dm1) * integrand(r * r); };
    const double half_dim = 0.5 * static_cast<double>(dim);
    const double sphere = 2.0 * std::pow(std::numbers::pi, half_dim) / std::tgamma(half_dim);
    value = sphere * integrate_half_line(radial, breaks, radius, opt, &error);
    error *= sphere;
  } else {
    // Each axis integral is even in its coordinate, so integrate [0, R] and double.
    QuadratureOptions inner = opt;
    inner.rel_tol = opt.rel_tol * 1e-1;
    inner.max_depth = std::min(opt.max_depth, 15u);
    // Beyond the peak the integrand only decays along the inner axis.
    const double peak_sq = std::log(1.0 + integrand.inv_gap / integrand.inv_wide) / integrand.inv_gap;
    auto axis2 = [&](double sq_prefix) {
      if (sq_prefix > peak_sq && integrand(sq_prefix) == 0.0) return 0.0;
      auto f = [&](double t) { return integrand(sq_prefix + t * t); };
      return 2.0 * integrate_half_line(f, breaks, radius, inner, nullptr);
    };
    auto axis3 = [&](double sq_prefix) {
      auto f = [&](double t) { return axis2(sq_prefix + t * t); };
      return 2.0 * integrate_half_line(f, breaks, radius, inner, nullptr);
    };
    std::function<double(double)> outer;
    if (dim == 1) {
      outer = [&](double t) { return integrand(t * t); };
    } else if (dim == 2) {
      outer = [&](double t) { return axis2(t * t); };
    } else {
      outer = [&](double t) { return axis3(t * t); };
    }
    value = 2.0 * integrate_half_line(outer, breaks, radius, opt, &error);
    error *= 2.0;
  }
  check_quadrature(value, error, opt.rel_tol, "delta_numeric");
  return value;
}

SimilarityMatrix::SimilarityMatrix(const KernelDictionary& dict, std::size_t input_dim)
    : n_(dict.size()),
      input_dim_(input_dim),
      delta_(n_ * n_, 0.0),
      log_delta_(n_ * n_, -std::numeric_limits<double>::infinity()) {
  if (n_ == 0) throw ValidationError("similarity: empty dictionary");
  if (input_dim == 0) throw ValidationError("similarity: input dimension must be >= 1");
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      const double lg = log_delta_closed_form(dict[i], dict[j], input_dim);
      const double v = std::exp(lg);
      log_delta_[i * n_ + j] = log_delta_[j * n_ + i] = lg;
      delta_[i * n_ + j] = delta_[j * n_ + i] = v;
    }
  }
}

bool SimilarityMatrix::closer(std::size_t i, std::size_t a, std::size_t b) const {
  const double la = log_delta(i, a);
  const double lb = log_delta(i, b);
  if (la != lb) return la < lb;
  return a < b;
}

FeedbackGraph::FeedbackGraph(std::vector<NodeSet> out_adj, std::vector<double> thresholds)
    : out_(std::move(out_adj)), in_(out_.size()), adj_(out_.size() * out_.size(), 0),
      thresholds_(std::move(thresholds)) {
  const std::size_t n = out_.size();
  if (n == 0) throw ValidationError("feedback graph: no nodes");
  if (!thresholds_.empty() && thresholds_.size() != n) {
    throw ValidationError("feedback graph: one threshold per node required");
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& row = out_[i];
    for (std::size_t j : row) {
      if (j >= n) throw ValidationError("feedback graph: neighbour id out of range");
    }
    row.push_back(i);
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    for (std::size_t j : row) adj_[i * n + j] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : out_[i]) in_[j].push_back(i);
  }
  dominating_ = greedy_dominating_set(*this);
}

std::size_t FeedbackGraph::edge_count() const noexcept {
  std::size_t total = 0;
  for (const auto& row : out_) total += row.size();
  return total;
}

FeedbackGraph build_graph(const SimilarityMatrix& sim, std::size_t out_degree) {
  const std::size_t n = sim.size();
  if (out_degree < 1 || out_degree > n) {
    throw ValidationError("build_graph: out-degree M=" + std::to_string(out_degree) +
                          " must lie in [1, " + std::to_string(n) + "]");
  }
  std::vector<NodeSet> out(n);
  std::vector<double> gamma(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    // Delta(i, i) = 0 is strictly minimal, so i always ranks first.
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(out_degree),
                      order.end(),
                      [&](std::size_t a, std::size_t b) { return sim.closer(i, a, b); });
    out[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(out_degree));
    gamma[i] = sim.delta(i, order[out_degree - 1]);
  }
  return FeedbackGraph(std::move(out), std::move(gamma));
}

FeedbackGraph build_graph(const KernelDictionary& dict, std::size_t out_degree,
                          std::size_t input_dim) {
  return build_graph(SimilarityMatrix(dict, input_dim), out_degree);
}

NodeSet greedy_dominating_set(const FeedbackGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<char> covered(n, 0);
  std::size_t remaining = n;
  NodeSet chosen;
  while (remaining > 0) {
    std::size_t best = kNone;
    std::size_t best_gain = 0;
    for (std::size_t v = 0; v < n; ++v) {
      std::size_t gain = 0;
      for (std::size_t w : graph.out_neighbors(v)) gain += covered[w] ? 0 : 1;
      if (gain > best_gain) {
        best_gain = gain;
        best = v;
      }
    }
    // Self-loops guarantee an uncovered node covers at least itself.
    for (std::size_t w : graph.out_neighbors(best)) {
      if (!covered[w]) {
        covered[w] = 1;
        --remaining;
      }
    }
    chosen.push_back(best);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

bool is_dominating(const FeedbackGraph& graph, std::span<const std::size_t> set) {
  const std::size_t n = graph.size();
  for (std::size_t v = 0; v < n; ++v) {
    bool hit = false;
    for (std::size_t d : set) {
      if (d < n && graph.has_edge(d, v)) {
        hit = true;
        break;
      }
    }
    if (!hit) return false;
  }
  return true;
}

RefinedEdgeSet::RefinedEdgeSet(const FeedbackGraph& base, NodeSet dominating,
                               std::vector<std::pair<std::size_t, std::size_t>> extra_edges)
    : base_(&base), dominating_(std::move(dominating)), extra_(std::move(extra_edges)),
      extra_source_(base.size(), kNone) {
  for (const auto& [from, to] : extra_) extra_source_[to] = from;
}

NodeSet RefinedEdgeSet::out_neighbors(std::size_t i) const {
  NodeSet out = base_->out_neighbors(i);
  bool added = false;
  for (const auto& [from, to] : extra_) {
    if (from == i && !base_->has_edge(i, to)) {
      out.push_back(to);
      added = true;
    }
  }
  if (added) std::sort(out.begin(), out.end());
  return out;
}

NodeSet RefinedEdgeSet::in_neighbors(std::size_t i) const {
  NodeSet in = base_->in_neighbors(i);
  const std::size_t src = extra_source_[i];
  if (src != kNone && !base_->has_edge(src, i)) {
    in.insert(std::lower_bound(in.begin(), in.end(), src), src);
  }
  return in;
}

RefinedEdgeSet refine_edges(const FeedbackGraph& graph, NodeSet d_prime,
                            const SimilarityMatrix& sim) {
  if (d_prime.empty()) throw ValidationError("refine_edges: empty node subset");
  if (sim.size() != graph.size()) throw ValidationError("refine_edges: graph/similarity size mismatch");
  std::sort(d_prime.begin(), d_prime.end());
  d_prime.erase(std::unique(d_prime.begin(), d_prime.end()), d_prime.end());
  const std::size_t n = graph.size();
  std::vector<char> member(n, 0);
  for (std::size_t d : d_prime) {
    if (d >= n) throw ValidationError("refine_edges: node id out of range");
    member[d] = 1;
  }
  std::vector<std::pair<std::size_t, std::size_t>> extra;
  for (std::size_t i = 0; i < n; ++i) {
    if (member[i]) continue;
    bool covered = false;
    for (std::size_t j : graph.in_neighbors(i)) {
      if (member[j]) {
        covered = true;
        break;
      }
    }
    if (covered) continue;
    std::size_t nearest = d_prime.front();
    for (std::size_t j : d_prime) {
      if (sim.closer(i, j, nearest)) nearest = j;
    }
    extra.emplace_back(nearest, i);
  }
  return RefinedEdgeSet(graph, std::move(d_prime), std::move(extra));
}

Lemma2Check verify_lemma2_bound(const KernelSpec& a, const KernelSpec& b,
                                std::span<const double> points, std::span<const double> alpha_a,
                                std::span<const double> alpha_b) {
  const std::size_t count = points.size();
  if (count == 0 || alpha_a.size() != count || alpha_b.size() != count) {
    throw ValidationError("lemma2: need one weight per point for each kernel");
  }
  for (double x : points) {
    if (!(std::abs(x) <= 1.0)) throw ValidationError("lemma2: points must satisfy |x| <= 1");
  }
  const double inv2a = 1.0 / (2.0 * a.sigma * a.sigma);
  const double inv2b = 1.0 / (2.0 * b.sigma * b.sigma);
  auto gap_sq = [&](double x) {
    double fa = 0.0;
    double fb = 0.0;
    for (std::size_t t = 0; t < count; ++t) {
      const double r = x - points[t];
      fa += alpha_a[t] * std::exp(-r * r * inv2a);
      fb += alpha_b[t] * std::exp(-r * r * inv2b);
    }
    return (fa - fb) * (fa - fb);
  };
  constexpr double kUnitBall = 2.0;  // length of [-1, 1]
  constexpr double kTol = 1e-10;
  // Split at the sample points, where the integrand has its bumps.
  std::vector<double> cuts(points.begin(), points.end());
  cuts.push_back(-1.0);
  cuts.push_back(1.0);
  std::sort(cuts.begin(), cuts.end());
  double integral = 0.0;
  double error = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (cuts[k + 1] <= cuts[k]) continue;
    double err = 0.0;
    integral += Rule::integrate(gap_sq, cuts[k], cuts[k + 1], 40, kTol, &err);
    error += err;
  }
  check_quadrature(integral, error, kTol, "lemma2");

  double c_a = 0.0;
  double c_b = 0.0;
  for (std::size_t t = 0; t < count; ++t) {
    c_a += alpha_a[t] * alpha_a[t];
    c_b += alpha_b[t] * alpha_b[t];
  }
  const double c_max = std::max(c_a, c_b);
  const double delta = delta_numeric(a, b, 1);
  Lemma2Check check;
  check.lhs = integral / kUnitBall;
  check.rhs = (2.0 * c_max / kUnitBall) * static_cast<double>(count) * (delta + 2.0 * kUnitBall);
  check.holds = check.lhs <= check.rhs;
  return check;
}

void write_edge_list(std::ostream& out, const FeedbackGraph& graph, const SimilarityMatrix& sim) {
  const std::size_t n = graph.size();
  out.precision(17);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : graph.out_neighbors(i)) {
      out << (i + 1) << ' ' << (j + 1) << ' ' << sim.delta(i, j) << '\n';
    }
  }
  if (!graph.thresholds().empty()) {
    out << "# gamma\n";
    for (std::size_t i = 0; i < n; ++i) out << "# " << (i + 1) << ' ' << graph.thresholds()[i] << '\n';
  }
  out << "# dominating";
  for (std::size_t d : graph.dominating_set()) out << ' ' << (d + 1);
  out << '\n';
}

}  // namespace sfgmkl
