#pragma once

// Kernel similarity, the degree-capped feedback graph over kernels, its greedy
// dominating set, and the per-round edge refinement.
//
// Node ids are 0-based everywhere in this header; node v corresponds to the
// dictionary entry with KernelSpec::index == v + 1. Text output converts to
// 1-based ids.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "sfgmkl/kernel_dict.hpp"

namespace sfgmkl {

using NodeSet = std::vector<std::size_t>;  // sorted ascending, no duplicates

/// log of int |kappa_i(rho) - kappa_j(rho)|^2 d rho over R^d, evaluated without
/// cancellation or overflow. Returns -infinity for identical bandwidths.
double log_delta_closed_form(const KernelSpec& a, const KernelSpec& b, std::size_t dim);
/// exp(log_delta_closed_form). Throws NumericalError if the value overflows.
double delta_closed_form(const KernelSpec& a, const KernelSpec& b, std::size_t dim);

struct QuadratureOptions {
  enum class Layout {
    tensor_box,  // nested adaptive rule over [-R, R]^d
    radial,      // one adaptive rule over the radius, times the sphere area
  };
  Layout layout = Layout::tensor_box;
  double rel_tol = 1e-11;
  unsigned max_depth = 40;
};

/// Adaptive Gauss-Kronrod evaluation of the same integral, for d in {1, 2, 3}.
/// The box half-width covers both kernels' tails to below 1e-10. Used as an
/// independent check on the closed form. Throws NumericalError when the
/// requested tolerance is not reached.
double delta_numeric(const KernelSpec& a, const KernelSpec& b, std::size_t dim,
                     const QuadratureOptions& options = {});

class SimilarityMatrix {
 public:
  SimilarityMatrix(const KernelDictionary& dict, std::size_t input_dim);

  std::size_t size() const noexcept { return n_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  /// Delta between nodes i and j; +infinity if it exceeds double range.
  double delta(std::size_t i, std::size_t j) const { return delta_[i * n_ + j]; }
  double log_delta(std::size_t i, std::size_t j) const { return log_delta_[i * n_ + j]; }
  /// Strict "i's similarity to a is closer than to b", ties broken by lower index.
  bool closer(std::size_t i, std::size_t a, std::size_t b) const;

 private:
  std::size_t n_ = 0;
  std::size_t input_dim_ = 0;
  std::vector<double> delta_;
  std::vector<double> log_delta_;
};

class FeedbackGraph {
 public:
  /// Graph from explicit out-neighbour lists. Self-loops are added if missing
  /// and the greedy dominating set is attached.
  explicit FeedbackGraph(std::vector<NodeSet> out_adj, std::vector<double> thresholds = {});

  std::size_t size() const noexcept { return out_.size(); }
  const NodeSet& out_neighbors(std::size_t i) const { return out_[i]; }
  const NodeSet& in_neighbors(std::size_t i) const { return in_[i]; }
  bool has_edge(std::size_t from, std::size_t to) const { return adj_[from * out_.size() + to]; }
  std::size_t edge_count() const noexcept;
  /// gamma_i; empty when the graph was not built from similarities.
  const std::vector<double>& thresholds() const noexcept { return thresholds_; }
  const NodeSet& dominating_set() const noexcept { return dominating_; }

 private:
  std::vector<NodeSet> out_;
  std::vector<NodeSet> in_;
  std::vector<char> adj_;
  std::vector<double> thresholds_;
  NodeSet dominating_;
};

/// For every node, the M nodes with the smallest Delta (itself included, ties
/// to the lower index). gamma_i is the M-th smallest Delta. Rejects M outside [1, N].
FeedbackGraph build_graph(const SimilarityMatrix& sim, std::size_t out_degree);
FeedbackGraph build_graph(const KernelDictionary& dict, std::size_t out_degree,
                          std::size_t input_dim);

/// Greedy set cover over out-neighbourhoods: repeatedly take the node covering
/// the most still-uncovered nodes, lowest index on ties.
NodeSet greedy_dominating_set(const FeedbackGraph& graph);
/// Every node has an in-neighbour in the set (direct scan).
bool is_dominating(const FeedbackGraph& graph, std::span<const std::size_t> set);

/// A base graph plus one round's extra edges, dominated by dominating_set().
class RefinedEdgeSet {
 public:
  RefinedEdgeSet(const FeedbackGraph& base, NodeSet dominating,
                 std::vector<std::pair<std::size_t, std::size_t>> extra_edges);

  const FeedbackGraph& base() const noexcept { return *base_; }
  const NodeSet& dominating_set() const noexcept { return dominating_; }
  /// (from, to) pairs added for this round.
  const std::vector<std::pair<std::size_t, std::size_t>>& extra_edges() const noexcept {
    return extra_;
  }
  std::size_t size() const noexcept { return base_->size(); }
  /// Out-neighbours in the union graph, ascending.
  NodeSet out_neighbors(std::size_t i) const;
  NodeSet in_neighbors(std::size_t i) const;

 private:
  const FeedbackGraph* base_;
  NodeSet dominating_;
  std::vector<std::pair<std::size_t, std::size_t>> extra_;
  std::vector<std::size_t> extra_source_;  // per target node, source of its extra edge or npos
};

/// For every node outside d_prime with no in-edge from d_prime in the base
/// graph, adds an edge from its Delta-nearest member of d_prime.
RefinedEdgeSet refine_edges(const FeedbackGraph& graph, NodeSet d_prime,
                            const SimilarityMatrix& sim);

/// Both sides of the bound relating the L2 distance between the two kernels'
/// expansions over the unit ball to Delta, for d = 1.
struct Lemma2Check {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// f_a(x) = sum_t alpha_a[t] kappa_a(x - x_t), same for b, with |x_t| <= 1.
///   lhs = (1/U) int_{|x|<=1} |f_a - f_b|^2 dx
///   rhs = (2 C / U) sum_t (Delta(a, b) + 2U),   C = max(|alpha_a|^2, |alpha_b|^2)
/// where U = 2 is the length of the unit interval.
Lemma2Check verify_lemma2_bound(const KernelSpec& a, const KernelSpec& b,
                                std::span<const double> points, std::span<const double> alpha_a,
                                std::span<const double> alpha_b);

/// Edge-list text: "i j delta_ij" per edge with 1-based ids, followed by
/// "# gamma" and "# dominating" sections.
void write_edge_list(std::ostream& out, const FeedbackGraph& graph, const SimilarityMatrix& sim);

}  // namespace sfgmkl
