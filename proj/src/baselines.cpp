#include "sfgmkl/baselines.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "sfgmkl/error.hpp"
#include "sfgmkl/online_learner.hpp"
#include "sfgmkl/simd.hpp"

namespace sfgmkl {

void validate(const StreamView& stream) {
  if (stream.dim == 0) throw ValidationError("stream: input dimension must be >= 1");
  if (stream.features.size() != stream.targets.size() * stream.dim) {
    throw ValidationError("stream: feature matrix size does not match T x d");
  }
}

FullDictionaryLearner::FullDictionaryLearner(std::vector<FeatureMap> maps, double eta,
                                             double lambda)
    : maps_(std::move(maps)), eta_(eta), lambda_(lambda) {
  const std::size_t n = maps_.size();
  if (n == 0) throw ValidationError("full dictionary: no kernels");
  if (!(eta_ > 0.0)) throw ValidationError("full dictionary: eta must be positive");
  const std::size_t fdim = maps_.front().feature_dim();
  models_.assign(n, PerKernelModel(fdim));
  weights_.assign(n, 1.0);
  z_.assign(n, std::vector<double>(fdim));
  grad_.assign(n, std::vector<double>(fdim));
  pred_.assign(n, 0.0);
  loss_.assign(n, 0.0);
  all_.resize(n);
  std::iota(all_.begin(), all_.end(), std::size_t{0});
}

double FullDictionaryLearner::step(std::span<const double> x, double y) {
  const std::size_t n = maps_.size();
  for (std::size_t i = 0; i < n; ++i) {
    maps_[i].features_into(x, z_[i]);
    pred_[i] = models_[i].predict(z_[i]);
  }
  const double prediction = combine_predictions(weights_, all_, pred_);
  for (std::size_t i = 0; i < n; ++i) {
    loss_[i] = kernel_loss_with_gradient(models_[i], z_[i], pred_[i], y, lambda_, grad_[i]).value;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (double g : grad_[i]) {
      if (!std::isfinite(g)) throw NumericalError("full dictionary: non-finite gradient");
    }
    simd::axpy(-eta_, grad_[i], models_[i].theta);
  }
  update_weights(weights_, loss_, eta_);
  return prediction;
}

std::vector<double> run_full_dictionary(const StreamView& stream, std::vector<FeatureMap> maps,
                                        double eta, double lambda) {
  validate(stream);
  FullDictionaryLearner learner(std::move(maps), eta, lambda);
  std::vector<double> out(stream.size());
  for (std::size_t t = 0; t < stream.size(); ++t) out[t] = learner.step(stream.row(t), stream.targets[t]);
  return out;
}

Eigen::MatrixXd feature_matrix(const StreamView& stream, const FeatureMap& map) {
  const std::size_t rows = stream.size();
  const std::size_t cols = map.feature_dim();
  Eigen::MatrixXd z(rows, cols);
  std::vector<double> buf(cols);
  for (std::size_t t = 0; t < rows; ++t) {
    map.features_into(stream.row(t), buf);
    for (std::size_t k = 0; k < cols; ++k) z(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = buf[k];
  }
  return z;
}

HindsightOracle fit_hindsight(const StreamView& stream, const std::vector<FeatureMap>& maps,
                              double lambda) {
  validate(stream);
  if (maps.empty()) throw ValidationError("hindsight: no kernels");
  if (stream.size() == 0) throw ValidationError("hindsight: empty stream");
  if (!(lambda >= 0.0)) throw ValidationError("hindsight: lambda must be >= 0");
  const double horizon = static_cast<double>(stream.size());
  const Eigen::Map<const Eigen::VectorXd> y(stream.targets.data(),
                                            static_cast<Eigen::Index>(stream.size()));
  HindsightOracle oracle;
  oracle.theta.resize(maps.size());
  oracle.cumulative_loss.resize(maps.size());
  oracle.used_pseudo_inverse.assign(maps.size(), false);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const Eigen::MatrixXd z = feature_matrix(stream, maps[i]);
    Eigen::MatrixXd gram = z.transpose() * z;
    gram.diagonal().array() += lambda * horizon;
    const Eigen::VectorXd rhs = z.transpose() * y;
    Eigen::VectorXd theta;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (ok) {
      // LDLT succeeds on semidefinite input too; reject tiny pivots.
      const auto d = ldlt.vectorD().cwiseAbs();
      ok = d.minCoeff() > 1e-12 * std::max(1.0, d.maxCoeff());
    }
    if (ok) {
      theta = ldlt.solve(rhs);
    } else {
      oracle.used_pseudo_inverse[i] = true;
      theta = z.completeOrthogonalDecomposition().solve(y);
    }
    const double sq = (z * theta - y).squaredNorm();
    oracle.cumulative_loss[i] = sq + lambda * horizon * theta.squaredNorm();
    oracle.theta[i].assign(theta.data(), theta.data() + theta.size());
  }
  oracle.best = 0;
  for (std::size_t i = 1; i < maps.size(); ++i) {
    if (oracle.cumulative_loss[i] < oracle.cumulative_loss[oracle.best]) oracle.best = i;
  }
  return oracle;
}

std::vector<double> HindsightOracle::predict(const StreamView& stream,
                                             const std::vector<FeatureMap>& maps) const {
  const FeatureMap& map = maps.at(best);
  std::vector<double> z(map.feature_dim());
  std::vector<double> out(stream.size());
  for (std::size_t t = 0; t < stream.size(); ++t) {
    map.features_into(stream.row(t), z);
    out[t] = simd::dot(theta[best], z);
  }
  return out;
}

std::vector<double> regret_curve(std::span<const double> learner_predictions,
                                 std::span<const double> oracle_predictions,
                                 std::span<const double> targets) {
  if (learner_predictions.size() != targets.size() || oracle_predictions.size() != targets.size()) {
    throw ValidationError("regret_curve: prediction and target lengths differ");
  }
  std::vector<double> curve(targets.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    acc += combined_loss(learner_predictions[t], targets[t]) -
           combined_loss(oracle_predictions[t], targets[t]);
    curve[t] = acc;
  }
  return curve;
}

}  // namespace sfgmkl
