#pragma once

// Gaussian-RBF kernel dictionary and its random Fourier feature maps.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace sfgmkl {

using Rng = std::mt19937_64;

/// One dictionary entry: kappa(rho) = exp(-|rho|^2 / (2 sigma^2)).
struct KernelSpec {
  std::size_t index = 1;  // 1-based position in the dictionary
  double sigma = 1.0;
};

using KernelDictionary = std::vector<KernelSpec>;

/// Number of kernels in the default benchmark dictionary.
inline constexpr std::size_t kDefaultDictionarySize = 41;

/// sigma_i = 10^((i - 21) / 10) for i = 1..41, i.e. bandwidths 10^-2 ... 10^2.
KernelDictionary default_dictionary();
/// Dictionary with the given bandwidths, indexed 1..n in order.
KernelDictionary make_dictionary(std::span<const double> sigmas);
void validate(const KernelSpec& spec);

double eval_kernel(const KernelSpec& spec, std::span<const double> rho);

/// D spectral samples of one kernel together with the 2D-dimensional map
///   z(x) = D^{-1/2} [sin(psi_1.x) ... sin(psi_D.x), cos(psi_1.x) ... cos(psi_D.x)].
///
/// Samples are stored coordinate-major (psi(c, j) at c * D + j) so that the
/// D projections vectorize over j.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t kernel_index, std::size_t input_dim, std::size_t num_rf,
             std::vector<double> coord_major_samples);

  std::size_t kernel_index() const noexcept { return kernel_index_; }
  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t num_rf() const noexcept { return num_rf_; }
  std::size_t feature_dim() const noexcept { return 2 * num_rf_; }

  double psi(std::size_t coord, std::size_t sample) const {
    return samples_[coord * num_rf_ + sample];
  }
  std::vector<double> spectral_sample(std::size_t sample) const;
  std::span<const double> raw_samples() const noexcept { return samples_; }

  /// Writes z(x) into out (size 2D). Throws on dimension mismatch.
  void features_into(std::span<const double> x, std::span<double> out) const;
  std::vector<double> features(std::span<const double> x) const;

  bool operator==(const FeatureMap&) const = default;

 private:
  std::size_t kernel_index_ = 0;
  std::size_t input_dim_ = 0;
  std::size_t num_rf_ = 0;
  std::vector<double> samples_;
};

/// Draws num_rf i.i.d. samples from N(0, sigma^-2 I_d), the spectral density of
/// the Gaussian-RBF kernel.
FeatureMap sample_spectral(const KernelSpec& spec, std::size_t num_rf, std::size_t input_dim,
                           Rng& rng);

/// Feature maps for a whole dictionary. Kernel i's map is seeded from
/// (seed, i) alone, so a map does not depend on which other kernels exist.
std::vector<FeatureMap> sample_dictionary(const KernelDictionary& dict, std::size_t num_rf,
                                          std::size_t input_dim, std::uint64_t seed);

/// Linear model theta over z_i(.); its size stays 2D forever.
struct PerKernelModel {
  std::vector<double> theta;

  explicit PerKernelModel(std::size_t feature_dim = 0) : theta(feature_dim, 0.0) {}
  double predict(std::span<const double> z) const;
};

struct LossEval {
  double value = 0.0;  // clipped into [0, 1]
  double raw = 0.0;    // before clipping
  bool clipped = false;
};

/// (theta.z - y)^2 + lambda |theta|^2, clipped into [0, 1].
double kernel_loss(const PerKernelModel& model, std::span<const double> z, double y,
                   double lambda);

/// Loss plus gradient in theta. The gradient 2(theta.z - y) z + 2 lambda theta
/// is written to grad when the loss was not clipped; a clipped loss has zero
/// gradient so the gradient bound holds.
LossEval kernel_loss_with_gradient(const PerKernelModel& model, std::span<const double> z,
                                   double y, double lambda, std::span<double> grad);
/// Same as above when theta.z is already known.
LossEval kernel_loss_with_gradient(const PerKernelModel& model, std::span<const double> z,
                                   double prediction, double y, double lambda,
                                   std::span<double> grad);

}  // namespace sfgmkl
