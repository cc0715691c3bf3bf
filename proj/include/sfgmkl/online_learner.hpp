#pragma once

// Online multi-kernel regression over a similarity feedback graph.
//
// Each round draws one node of the graph, predicts with the weighted
// combination of that node's out-neighbour kernels, and updates only those
// kernels, using importance weights 1/q for the probability that a kernel was
// observed. The refined variant augments the graph every round so that the
// currently heaviest nodes dominate it.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "sfgmkl/kernel_dict.hpp"
#include "sfgmkl/similarity_graph.hpp"

namespace sfgmkl {

enum class Variant { plain, refined };

struct Hyperparams {
  double eta = 0.0;  // learning rate
  double xi = 0.0;   // exploration rate, in (0, 1)
  std::size_t num_rf = 50;
  std::size_t out_degree = 5;
  double lambda = 1e-3;
  std::size_t beta_rank = 10;  // rank of the node weight that sets beta (refined)
  /// Rounds after which the draw is replaced by the heaviest node; 0 disables.
  std::size_t exploit_after = 300;
  Variant variant = Variant::plain;
  /// Keep node weights at their initial value (used by equivalence checks).
  bool freeze_node_weights = false;
};

/// Benchmark defaults with eta = xi = 1/sqrt(horizon).
Hyperparams default_hyperparams(std::size_t horizon, Variant variant = Variant::plain);
void validate(const Hyperparams& hp, std::size_t num_kernels);

struct LearnerState {
  std::vector<PerKernelModel> models;   // theta_i
  std::vector<double> kernel_weights;   // w_i, max-normalized
  std::vector<double> node_weights;     // u_i, max-normalized
  std::size_t t = 0;                    // rounds completed
  Rng rng;

  LearnerState(std::size_t num_kernels, std::size_t feature_dim, std::uint64_t seed);
};

struct DrawOutcome {
  std::size_t node = 0;       // I_t
  NodeSet subset;             // out-neighbourhood of I_t in the round's graph
  std::vector<double> pmf;    // p_t
  std::vector<double> q;      // probability each kernel is observed
  NodeSet dominating;         // dominating set used for exploration
  double beta = 0.0;          // refined variant only
  std::size_t extra_edges = 0;
  bool exploited = false;     // drawn by argmax instead of sampling
};

struct StepResult {
  double prediction = 0.0;
  double loss = 0.0;  // combined loss of the prediction
  DrawOutcome draw;
};

// --- round primitives ------------------------------------------------------

/// p_i = (1 - xi) u_i / U + xi / |D| [i in D].
std::vector<double> compute_pmf(std::span<const double> node_weights, const NodeSet& dominating,
                                double xi);
/// Inverse-CDF draw; rejects pmfs that are off the simplex by more than 1e-9.
std::size_t draw_node(std::span<const double> pmf, Rng& rng);
/// Lowest index among the maxima.
std::size_t argmax_index(std::span<const double> values);

/// q_i = sum of pmf over the in-neighbours of i. Exactly 1 when i's
/// in-neighbourhood is every node.
std::vector<double> observation_probabilities(const FeedbackGraph& graph,
                                              std::span<const double> pmf);
std::vector<double> observation_probabilities(const RefinedEdgeSet& graph,
                                              std::span<const double> pmf);

/// sum_{i in subset} (w_i / sum_{j in subset} w_j) * per_kernel[i], ascending i.
double combine_predictions(std::span<const double> kernel_weights, const NodeSet& subset,
                           std::span<const double> per_kernel);

/// l_i = L_i / q_i on the subset, 0 elsewhere. q_i <= 0 inside the subset is a fault.
std::vector<double> estimate_losses(const NodeSet& subset, std::span<const double> q,
                                    std::span<const double> kernel_losses);
/// lhat_i = L / p_i for i = node, 0 elsewhere.
std::vector<double> estimate_node_loss(std::size_t node, std::span<const double> pmf,
                                       double combined_loss);

/// theta_i -= eta grad_i / q_i for i in subset; gradients is indexed by kernel.
void update_theta(LearnerState& state, const NodeSet& subset, std::span<const double> q,
                  std::span<const std::vector<double>> gradients, double eta);

/// Multiplicative updates, then division by the maximum; weights are kept at
/// or above the smallest normal double.
void update_weights(std::vector<double>& weights, std::span<const double> estimates, double eta);

/// Clipped squared error of the combined prediction.
double combined_loss(double prediction, double y);

double pmf_entropy(std::span<const double> pmf);

// --- learner ---------------------------------------------------------------

class OnlineLearner {
 public:
  /// maps[i] is kernel i's feature map; sim is needed for the refined variant.
  OnlineLearner(std::vector<FeatureMap> maps, const FeedbackGraph& graph,
                const SimilarityMatrix* sim, const Hyperparams& hp, std::uint64_t draw_seed);

  /// One full round on (x, y). Throws NumericalError on non-finite gradients.
  StepResult step(std::span<const double> x, double y);

  const LearnerState& state() const noexcept { return state_; }
  LearnerState& mutable_state() noexcept { return state_; }
  const Hyperparams& hyperparams() const noexcept { return hp_; }
  const std::vector<FeatureMap>& feature_maps() const noexcept { return maps_; }
  /// Rounds in which beta exceeded 1/N (refined variant).
  std::size_t beta_above_inverse_n() const noexcept { return beta_above_inverse_n_; }

  /// Newline-delimited JSON record per round, or nullptr to disable.
  void set_trace(std::ostream* sink) noexcept { trace_ = sink; }

 private:
  StepResult finish_round(DrawOutcome draw, std::span<const double> x, double y);
  void write_trace(const StepResult& r) const;

  std::vector<FeatureMap> maps_;
  const FeedbackGraph* graph_;
  const SimilarityMatrix* sim_;
  Hyperparams hp_;
  LearnerState state_;
  std::vector<std::vector<double>> z_scratch_;     // per kernel
  std::vector<std::vector<double>> grad_scratch_;  // per kernel
  std::vector<double> kernel_pred_;
  std::vector<double> kernel_loss_;
  std::size_t beta_above_inverse_n_ = 0;
  std::ostream* trace_ = nullptr;
};

/// beta_t = (1 - xi) * (rank-th largest u_i / U) + xi / N.
double refined_beta(std::span<const double> node_weights, std::size_t rank, double xi);
/// {i : u_i / U >= rank-th largest u_i / U}, the nodes whose pmf exceeds beta_t.
NodeSet refined_dominating_set(std::span<const double> node_weights, std::size_t rank);

}  // namespace sfgmkl
