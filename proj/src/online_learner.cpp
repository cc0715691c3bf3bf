#include "sfgmkl/online_learner.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>

#include <json.hpp>

#include "sfgmkl/error.hpp"
#include "sfgmkl/simd.hpp"

namespace sfgmkl {

namespace {

constexpr double kWeightFloor = std::numeric_limits<double>::min();

double total(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

std::vector<double> point_mass(std::size_t n, std::size_t at) {
  std::vector<double> pmf(n, 0.0);
  pmf[at] = 1.0;
  return pmf;
}

std::vector<double> sum_over_in_neighbors(std::size_t n, std::span<const double> pmf,
                                          const std::function<NodeSet(std::size_t)>& in_of) {
  if (pmf.size() != n) throw ValidationError("observation probabilities: pmf size mismatch");
  std::vector<double> q(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const NodeSet in = in_of(i);
    if (in.size() == n) {
      q[i] = 1.0;
      continue;
    }
    double acc = 0.0;
    for (std::size_t j : in) acc += pmf[j];
    q[i] = acc;
  }
  return q;
}

}  // namespace

Hyperparams default_hyperparams(std::size_t horizon, Variant variant) {
  if (horizon == 0) throw ValidationError("hyperparameters: horizon must be >= 1");
  Hyperparams hp;
  hp.eta = 1.0 / std::sqrt(static_cast<double>(horizon));
  hp.xi = hp.eta;
  hp.variant = variant;
  return hp;
}

void validate(const Hyperparams& hp, std::size_t num_kernels) {
  if (!(hp.eta > 0.0) || !std::isfinite(hp.eta)) throw ValidationError("eta must be positive");
  if (!(hp.xi > 0.0 && hp.xi < 1.0)) throw ValidationError("xi must lie in (0, 1)");
  if (hp.num_rf == 0) throw ValidationError("num_rf must be >= 1");
  if (!(hp.lambda >= 0.0) || !std::isfinite(hp.lambda)) throw ValidationError("lambda must be >= 0");
  if (hp.out_degree < 1 || hp.out_degree > num_kernels) {
    throw ValidationError("out_degree must lie in [1, " + std::to_string(num_kernels) + "]");
  }
  if (hp.variant == Variant::refined && (hp.beta_rank < 1 || hp.beta_rank > num_kernels)) {
    throw ValidationError("beta_rank must lie in [1, " + std::to_string(num_kernels) + "]");
  }
}

LearnerState::LearnerState(std::size_t num_kernels, std::size_t feature_dim, std::uint64_t seed)
    : models(num_kernels, PerKernelModel(feature_dim)),
      kernel_weights(num_kernels, 1.0),
      node_weights(num_kernels, 1.0),
      rng(seed) {}

std::vector<double> compute_pmf(std::span<const double> node_weights, const NodeSet& dominating,
                                double xi) {
  if (dominating.empty()) throw ValidationError("compute_pmf: empty dominating set");
  const std::size_t n = node_weights.size();
  const double u_total = total(node_weights);
  if (!(u_total > 0.0) || !std::isfinite(u_total)) {
    throw NumericalError("compute_pmf: node weights must be positive and finite");
  }
  std::vector<double> pmf(n);
  for (std::size_t i = 0; i < n; ++i) pmf[i] = (1.0 - xi) * node_weights[i] / u_total;
  const double bonus = xi / static_cast<double>(dominating.size());
  for (std::size_t d : dominating) {
    if (d >= n) throw ValidationError("compute_pmf: dominating node out of range");
    pmf[d] += bonus;
  }
  return pmf;
}

std::size_t draw_node(std::span<const double> pmf, Rng& rng) {
  if (pmf.empty()) throw ValidationError("draw_node: empty pmf");
  double sum = 0.0;
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("draw_node: negative or non-finite mass");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("draw_node: pmf does not sum to 1");
  // 53 random bits -> uniform in [0, 1).
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * sum;
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    if (pmf[i] <= 0.0) continue;
    cumulative += pmf[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

std::size_t argmax_index(std::span<const double> values) {
  if (values.empty()) throw ValidationError("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> observation_probabilities(const FeedbackGraph& graph,
                                              std::span<const double> pmf) {
  return sum_over_in_neighbors(graph.size(), pmf,
                               [&](std::size_t i) { return graph.in_neighbors(i); });
}

std::vector<double> observation_probabilities(const RefinedEdgeSet& graph,
                                              std::span<const double> pmf) {
  return sum_over_in_neighbors(graph.size(), pmf,
                               [&](std::size_t i) { return graph.in_neighbors(i); });
}

double combine_predictions(std::span<const double> kernel_weights, const NodeSet& subset,
                           std::span<const double> per_kernel) {
  if (subset.empty()) throw ValidationError("predict: empty kernel subset");
  double w_total = 0.0;
  for (std::size_t i : subset) w_total += kernel_weights[i];
  double out = 0.0;
  for (std::size_t i : subset) out += (kernel_weights[i] / w_total) * per_kernel[i];
  return out;
}

std::vector<double> estimate_losses(const NodeSet& subset, std::span<const double> q,
                                    std::span<const double> kernel_losses) {
  std::vector<double> est(q.size(), 0.0);
  for (std::size_t i : subset) {
    if (!(q[i] > 0.0)) {
      throw NumericalError("estimate_losses: kernel " + std::to_string(i + 1) +
                           " selected with zero observation probability");
    }
    est[i] = kernel_losses[i] / q[i];
  }
  return est;
}

std::vector<double> estimate_node_loss(std::size_t node, std::span<const double> pmf,
                                       double combined) {
  if (node >= pmf.size() || !(pmf[node] > 0.0)) {
    throw NumericalError("estimate_node_loss: drawn node has zero probability");
  }
  std::vector<double> est(pmf.size(), 0.0);
  est[node] = combined / pmf[node];
  return est;
}

void update_theta(LearnerState& state, const NodeSet& subset, std::span<const double> q,
                  std::span<const std::vector<double>> gradients, double eta) {
  for (std::size_t i : subset) {
    const auto& g = gradients[i];
    for (double v : g) {
      if (!std::isfinite(v)) {
        throw NumericalError("update_theta: non-finite gradient for kernel " +
                             std::to_string(i + 1) + " at round " + std::to_string(state.t + 1));
      }
    }
    simd::axpy(-eta / q[i], g, state.models[i].theta);
  }
}

void update_weights(std::vector<double>& weights, std::span<const double> estimates, double eta) {
  double peak = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (estimates[i] != 0.0) weights[i] *= std::exp(-eta * estimates[i]);
    peak = std::max(peak, weights[i]);
  }
  if (!(peak > 0.0)) {
    // Every weight underflowed in one step; the ratios are lost, so restart flat.
    std::fill(weights.begin(), weights.end(), 1.0);
    return;
  }
  for (double& w : weights) w = std::max(w / peak, kWeightFloor);
}

double combined_loss(double prediction, double y) {
  const double e = prediction - y;
  return std::min(e * e, 1.0);
}

double pmf_entropy(std::span<const double> pmf) {
  double h = 0.0;
  for (double p : pmf) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double refined_beta(std::span<const double> node_weights, std::size_t rank, double xi) {
  const std::size_t n = node_weights.size();
  if (rank < 1 || rank > n) throw ValidationError("beta rank out of range");
  std::vector<double> sorted(node_weights.begin(), node_weights.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   sorted.end(), std::greater<>());
  const double u_rank = sorted[rank - 1] / total(node_weights);
  return (1.0 - xi) * u_rank + xi / static_cast<double>(n);
}

NodeSet refined_dominating_set(std::span<const double> node_weights, std::size_t rank) {
  const std::size_t n = node_weights.size();
  if (rank < 1 || rank > n) throw ValidationError("beta rank out of range");
  std::vector<double> sorted(node_weights.begin(), node_weights.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   sorted.end(), std::greater<>());
  // Compare against the rank-th weight itself: (beta - xi/N) / (1 - xi) equals
  // it exactly in real arithmetic but may round below it.
  const double threshold = sorted[rank - 1];
  NodeSet members;
  for (std::size_t i = 0; i < n; ++i) {
    if (node_weights[i] >= threshold) members.push_back(i);
  }
  return members;
}

OnlineLearner::OnlineLearner(std::vector<FeatureMap> maps, const FeedbackGraph& graph,
                             const SimilarityMatrix* sim, const Hyperparams& hp,
                             std::uint64_t draw_seed)
    : maps_(std::move(maps)),
      graph_(&graph),
      sim_(sim),
      hp_(hp),
      state_(maps_.size(), maps_.empty() ? 0 : maps_.front().feature_dim(), draw_seed) {
  const std::size_t n = maps_.size();
  if (n == 0) throw ValidationError("learner: no kernels");
  if (graph.size() != n) throw ValidationError("learner: graph and dictionary sizes differ");
  validate(hp_, n);
  if (hp_.variant == Variant::refined && (sim_ == nullptr || sim_->size() != n)) {
    throw ValidationError("learner: refined variant needs the similarity matrix");
  }
  for (const auto& m : maps_) {
    if (m.feature_dim() != maps_.front().feature_dim() ||
        m.input_dim() != maps_.front().input_dim()) {
      throw ValidationError("learner: all feature maps must share D and d");
    }
  }
  const std::size_t fdim = maps_.front().feature_dim();
  z_scratch_.assign(n, std::vector<double>(fdim));
  grad_scratch_.assign(n, std::vector<double>(fdim));
  kernel_pred_.assign(n, 0.0);
  kernel_loss_.assign(n, 0.0);
}

StepResult OnlineLearner::step(std::span<const double> x, double y) {
  const std::size_t n = maps_.size();
  const std::size_t round = state_.t + 1;
  const bool exploit = hp_.exploit_after > 0 && round > hp_.exploit_after;
  const auto& u = state_.node_weights;

  DrawOutcome draw;
  draw.exploited = exploit;
  if (hp_.variant == Variant::plain) {
    draw.dominating = graph_->dominating_set();
    if (exploit) {
      draw.node = argmax_index(u);
      draw.pmf = point_mass(n, draw.node);
    } else {
      draw.pmf = compute_pmf(u, draw.dominating, hp_.xi);
      draw.node = draw_node(draw.pmf, state_.rng);
    }
    draw.q = observation_probabilities(*graph_, draw.pmf);
    draw.subset = graph_->out_neighbors(draw.node);
  } else {
    draw.beta = refined_beta(u, hp_.beta_rank, hp_.xi);
    if (draw.beta > 1.0 / static_cast<double>(n)) ++beta_above_inverse_n_;
    const RefinedEdgeSet refined =
        refine_edges(*graph_, refined_dominating_set(u, hp_.beta_rank), *sim_);
    draw.dominating = refined.dominating_set();
    draw.extra_edges = refined.extra_edges().size();
    if (exploit) {
      draw.node = argmax_index(u);
      draw.pmf = point_mass(n, draw.node);
    } else {
      draw.pmf = compute_pmf(u, draw.dominating, hp_.xi);
      draw.node = draw_node(draw.pmf, state_.rng);
    }
    draw.q = observation_probabilities(refined, draw.pmf);
    draw.subset = refined.out_neighbors(draw.node);
  }
  return finish_round(std::move(draw), x, y);
}

StepResult OnlineLearner::finish_round(DrawOutcome draw, std::span<const double> x, double y) {
  // Only the selected kernels' feature maps are evaluated.
  for (std::size_t i : draw.subset) {
    maps_[i].features_into(x, z_scratch_[i]);
    kernel_pred_[i] = state_.models[i].predict(z_scratch_[i]);
  }
  StepResult result;
  result.prediction = combine_predictions(state_.kernel_weights, draw.subset, kernel_pred_);
  result.loss = combined_loss(result.prediction, y);

  for (std::size_t i : draw.subset) {
    kernel_loss_[i] = kernel_loss_with_gradient(state_.models[i], z_scratch_[i], kernel_pred_[i], y,
                                                hp_.lambda, grad_scratch_[i])
                          .value;
  }
  if (!std::isfinite(result.prediction)) {
    throw NumericalError("learner: non-finite prediction at round " + std::to_string(state_.t + 1));
  }
  const std::vector<double> loss_est = estimate_losses(draw.subset, draw.q, kernel_loss_);
  update_theta(state_, draw.subset, draw.q, grad_scratch_, hp_.eta);
  update_weights(state_.kernel_weights, loss_est, hp_.eta);
  if (!hp_.freeze_node_weights) {
    const std::vector<double> node_est = estimate_node_loss(draw.node, draw.pmf, result.loss);
    update_weights(state_.node_weights, node_est, hp_.eta);
  }
  ++state_.t;
  result.draw = std::move(draw);
  if (trace_ != nullptr) write_trace(result);
  return result;
}

void OnlineLearner::write_trace(const StepResult& r) const {
  nlohmann::json rec;
  rec["round"] = state_.t;
  rec["node"] = r.draw.node + 1;
  std::vector<std::size_t> subset;
  for (std::size_t i : r.draw.subset) subset.push_back(i + 1);
  rec["subset"] = subset;
  rec["prediction"] = r.prediction;
  rec["loss"] = r.loss;
  rec["pmf_entropy"] = pmf_entropy(r.draw.pmf);
  if (hp_.variant == Variant::refined) {
    rec["beta"] = r.draw.beta;
    rec["extra_edges"] = r.draw.extra_edges;
  }
  *trace_ << rec.dump() << '\n';
}

}  // namespace sfgmkl
