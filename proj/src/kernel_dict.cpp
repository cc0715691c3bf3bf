#include "sfgmkl/kernel_dict.hpp"

#include <cmath>
#include <string>

#include "sfgmkl/error.hpp"
#include "sfgmkl/simd.hpp"

namespace sfgmkl {

KernelDictionary default_dictionary() {
  KernelDictionary dict;
  dict.reserve(kDefaultDictionarySize);
  for (std::size_t i = 1; i <= kDefaultDictionarySize; ++i) {
    const double exponent = (static_cast<double>(i) - 21.0) / 10.0;
    dict.push_back({i, std::pow(10.0, exponent)});
  }
  return dict;
}

KernelDictionary make_dictionary(std::span<const double> sigmas) {
  KernelDictionary dict;
  dict.reserve(sigmas.size());
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    dict.push_back({i + 1, sigmas[i]});
    validate(dict.back());
  }
  return dict;
}

void validate(const KernelSpec& spec) {
  if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
    throw ValidationError("kernel " + std::to_string(spec.index) +
                          ": bandwidth must be positive and finite");
  }
}

double eval_kernel(const KernelSpec& spec, std::span<const double> rho) {
  double sq = 0.0;
  for (double r : rho) sq += r * r;
  return std::exp(-sq / (2.0 * spec.sigma * spec.sigma));
}

FeatureMap::FeatureMap(std::size_t kernel_index, std::size_t input_dim, std::size_t num_rf,
                       std::vector<double> coord_major_samples)
    : kernel_index_(kernel_index),
      input_dim_(input_dim),
      num_rf_(num_rf),
      samples_(std::move(coord_major_samples)) {
  if (num_rf_ == 0) throw ValidationError("feature map: number of random features must be >= 1");
  if (input_dim_ == 0) throw ValidationError("feature map: input dimension must be >= 1");
  if (samples_.size() != num_rf_ * input_dim_) {
    throw ValidationError("feature map: expected " + std::to_string(num_rf_ * input_dim_) +
                          " sample coordinates, got " + std::to_string(samples_.size()));
  }
}

std::vector<double> FeatureMap::spectral_sample(std::size_t sample) const {
  std::vector<double> psi_j(input_dim_);
  for (std::size_t c = 0; c < input_dim_; ++c) psi_j[c] = psi(c, sample);
  return psi_j;
}

void FeatureMap::features_into(std::span<const double> x, std::span<double> out) const {
  if (x.size() != input_dim_) {
    throw ValidationError("rf_features: input has dimension " + std::to_string(x.size()) +
                          ", feature map expects " + std::to_string(input_dim_));
  }
  if (out.size() != feature_dim()) {
    throw ValidationError("rf_features: output buffer must have size 2D");
  }
  // Projections land in the sin block, then each angle becomes (sin, cos).
  simd::active().project(samples_.data(), num_rf_, input_dim_, x.data(), out.data());
  const double scale = 1.0 / std::sqrt(static_cast<double>(num_rf_));
  for (std::size_t j = 0; j < num_rf_; ++j) {
    const double angle = out[j];
    out[j] = scale * std::sin(angle);
    out[num_rf_ + j] = scale * std::cos(angle);
  }
}

std::vector<double> FeatureMap::features(std::span<const double> x) const {
  std::vector<double> z(feature_dim());
  features_into(x, z);
  return z;
}

FeatureMap sample_spectral(const KernelSpec& spec, std::size_t num_rf, std::size_t input_dim,
                           Rng& rng) {
  validate(spec);
  if (num_rf == 0) throw ValidationError("sample_spectral: num_rf must be >= 1");
  if (input_dim == 0) throw ValidationError("sample_spectral: input_dim must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0 / spec.sigma);
  // Draw sample by sample so the j-th vector is the j-th block of the stream.
  std::vector<double> samples(num_rf * input_dim);
  for (std::size_t j = 0; j < num_rf; ++j) {
    for (std::size_t c = 0; c < input_dim; ++c) samples[c * num_rf + j] = normal(rng);
  }
  return FeatureMap(spec.index, input_dim, num_rf, std::move(samples));
}

std::vector<FeatureMap> sample_dictionary(const KernelDictionary& dict, std::size_t num_rf,
                                          std::size_t input_dim, std::uint64_t seed) {
  std::vector<FeatureMap> maps;
  maps.reserve(dict.size());
  for (const auto& spec : dict) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(spec.index), 0x52464d41u};
    Rng rng(seq);
    maps.push_back(sample_spectral(spec, num_rf, input_dim, rng));
  }
  return maps;
}

double PerKernelModel::predict(std::span<const double> z) const { return simd::dot(theta, z); }

double kernel_loss(const PerKernelModel& model, std::span<const double> z, double y,
                   double lambda) {
  const double residual = model.predict(z) - y;
  const double raw = residual * residual + lambda * simd::squared_norm(model.theta);
  return raw > 1.0 ? 1.0 : raw;
}

LossEval kernel_loss_with_gradient(const PerKernelModel& model, std::span<const double> z,
                                   double y, double lambda, std::span<double> grad) {
  return kernel_loss_with_gradient(model, z, model.predict(z), y, lambda, grad);
}

LossEval kernel_loss_with_gradient(const PerKernelModel& model, std::span<const double> z,
                                   double prediction, double y, double lambda,
                                   std::span<double> grad) {
  const std::size_t n = model.theta.size();
  if (z.size() != n || grad.size() != n) {
    throw ValidationError("kernel_loss: theta, z and gradient sizes differ");
  }
  const double residual = prediction - y;
  LossEval eval;
  eval.raw = residual * residual + lambda * simd::squared_norm(model.theta);
  eval.clipped = eval.raw > 1.0;
  eval.value = eval.clipped ? 1.0 : eval.raw;
  if (eval.clipped) {
    for (auto& g : grad) g = 0.0;
    return eval;
  }
  for (std::size_t k = 0; k < n; ++k) grad[k] = 2.0 * residual * z[k] + 2.0 * lambda * model.theta[k];
  return eval;
}

}  // namespace sfgmkl
