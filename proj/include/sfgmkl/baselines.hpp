#pragma once

// Comparators: the learner that updates every kernel every round, and the
// best fixed RF predictor in hindsight.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sfgmkl/kernel_dict.hpp"
#include "sfgmkl/similarity_graph.hpp"

namespace sfgmkl {

/// Row-major T x d inputs with T targets, as consumed by the learners.
struct StreamView {
  std::span<const double> features;
  std::span<const double> targets;
  std::size_t dim = 0;

  std::size_t size() const noexcept { return targets.size(); }
  std::span<const double> row(std::size_t t) const { return features.subspan(t * dim, dim); }
};

void validate(const StreamView& stream);

/// Every round combines all N kernels with weights w / sum(w), then updates
/// every theta_i by a gradient step and every w_i by exp(-eta L_i).
class FullDictionaryLearner {
 public:
  FullDictionaryLearner(std::vector<FeatureMap> maps, double eta, double lambda);

  double step(std::span<const double> x, double y);

  const std::vector<PerKernelModel>& models() const noexcept { return models_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

 private:
  std::vector<FeatureMap> maps_;
  double eta_;
  double lambda_;
  std::vector<PerKernelModel> models_;
  std::vector<double> weights_;
  std::vector<std::vector<double>> z_;
  std::vector<std::vector<double>> grad_;
  std::vector<double> pred_;
  std::vector<double> loss_;
  NodeSet all_;
};

/// Predictions of the full-dictionary learner over a whole stream.
std::vector<double> run_full_dictionary(const StreamView& stream, std::vector<FeatureMap> maps,
                                        double eta, double lambda);

struct HindsightOracle {
  std::vector<std::vector<double>> theta;  // theta*_i per kernel
  /// sum_t (theta*_i.z_i(x_t) - y_t)^2 + lambda T |theta*_i|^2
  std::vector<double> cumulative_loss;
  std::size_t best = 0;  // j*, 0-based
  std::vector<bool> used_pseudo_inverse;

  /// theta*_best . z_best(x) for each row of the stream.
  std::vector<double> predict(const StreamView& stream, const std::vector<FeatureMap>& maps) const;
};

/// Per kernel: argmin_theta sum_t (theta.z_i(x_t) - y_t)^2 + lambda T |theta|^2,
/// solved through the 2D x 2D normal equations. The best kernel minimizes the
/// regularized cumulative loss (lowest index on ties). A singular system falls
/// back to the minimum-norm least-squares solution.
HindsightOracle fit_hindsight(const StreamView& stream, const std::vector<FeatureMap>& maps,
                              double lambda);

/// Feature matrix Z (T x 2D) for one kernel.
Eigen::MatrixXd feature_matrix(const StreamView& stream, const FeatureMap& map);

/// Partial sums of combined_loss(learner) - combined_loss(oracle).
std::vector<double> regret_curve(std::span<const double> learner_predictions,
                                 std::span<const double> oracle_predictions,
                                 std::span<const double> targets);

}  // namespace sfgmkl
