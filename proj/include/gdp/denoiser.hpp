#pragma once

#include <filesystem>
#include <vector>

#include "gdp/image.hpp"
#include "gdp/schedule.hpp"

namespace gdp {

/// Noise predictor eps(x_t, t). Implementations must be deterministic,
/// return the input shape, and be safe to call concurrently.
class EpsilonModel {
 public:
  virtual ~EpsilonModel() = default;

  virtual ImageTensor predict_eps(const ImageTensor& x_t, int t,
                                  const NoiseSchedule& sched) const = 0;

  /// Shape the model is defined on; patched sampling tiles larger images
  /// with patches of this size.
  virtual Shape native_shape() const = 0;
};

struct MixtureComponent {
  double weight;
  ImageTensor mean;
  double variance;  // isotropic, >= 0
};

/// Isotropic Gaussian mixture prior with exact noise prediction.
///
/// Under the forward process each component's marginal at step t is
/// N(sqrt(abar) mu_k, (abar s_k^2 + 1 - abar) I), so the score and hence
/// eps = -sqrt(1 - abar) grad log p_t are available in closed form.
class GaussianMixturePrior final : public EpsilonModel {
 public:
  /// Weights are normalized on construction; they must be positive.
  explicit GaussianMixturePrior(std::vector<MixtureComponent> components);

  ImageTensor predict_eps(const ImageTensor& x_t, int t, const NoiseSchedule& sched) const override;
  Shape native_shape() const override { return components_.front().mean.shape(); }

  const std::vector<MixtureComponent>& components() const { return components_; }

  /// Posterior responsibilities of each component at (x_t, t).
  std::vector<double> responsibilities(const ImageTensor& x_t, int t,
                                       const NoiseSchedule& sched) const;

 private:
  std::vector<MixtureComponent> components_;
};

/// Uniform prior over a finite dataset; the exact denoiser is a softmax
/// average of the (scaled) data points.
class EmpiricalPrior final : public EpsilonModel {
 public:
  explicit EmpiricalPrior(std::vector<ImageTensor> dataset);

  /// Every PNG / GDPF file in `dir`, in lexicographic path order.
  static EmpiricalPrior from_directory(const std::filesystem::path& dir);

  ImageTensor predict_eps(const ImageTensor& x_t, int t, const NoiseSchedule& sched) const override;
  Shape native_shape() const override { return dataset_.front().shape(); }

  /// E[x0 | x_t] under the empirical prior.
  ImageTensor posterior_mean(const ImageTensor& x_t, int t, const NoiseSchedule& sched) const;

  const std::vector<ImageTensor>& dataset() const { return dataset_; }

 private:
  std::vector<ImageTensor> dataset_;
};

/// Lower clamp on 1 - abar used by both priors.
inline constexpr double kMinNoiseVariance = 1e-12;

}  // namespace gdp
