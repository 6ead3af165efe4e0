#pragma once

#include <span>
#include <string>
#include <vector>

#include "gdp/degradation.hpp"
#include "gdp/denoiser.hpp"
#include "gdp/losses.hpp"
#include "gdp/rng.hpp"
#include "gdp/schedule.hpp"

namespace gdp {

/// Where the guidance gradient is taken (clean estimate vs. noisy latent)
/// and whether the shift bypasses or passes through the posterior-mean
/// coefficient.
enum class GuidanceVariant { X0, Xt, X0V1, XtV1 };

std::string variant_name(GuidanceVariant v);
/// Accepts "x0", "xt", "x0-v1", "xt-v1", with or without a "GDP-" prefix.
GuidanceVariant parse_variant(const std::string& name);
inline bool guides_clean_estimate(GuidanceVariant v) {
  return v == GuidanceVariant::X0 || v == GuidanceVariant::X0V1;
}

struct GuidanceConfig {
  GuidanceVariant variant = GuidanceVariant::X0;
  double scale = 0.0;
  int inner_steps = 1;
  LossWeights weights;
  /// Jointly optimize (f, M) of every AffineLight observation.
  bool optimize_params = false;
  double lr_factor = 1.0;
  /// Per-element rate: M moves by lr_offset * (w_mse * residual +
  /// w_illum * smoothness gradient).
  double lr_offset = 0.1;
  /// Premultiply the shift by beta_tilde_t (the "with variance" ablation).
  bool use_sigma = false;
};

void validate(const GuidanceConfig& cfg);

/// Posterior mean with a guidance shift already scaled by the caller
/// (descent direction, i.e. -s * grad).
ImageTensor guided_mean(GuidanceVariant variant, const ImageTensor& x_t, const ImageTensor& x0_tilde,
                        const ImageTensor& shift, int t, const NoiseSchedule& sched, bool use_sigma);

struct InnerLoopResult {
  /// Accumulated displacement of the guided variable.
  ImageTensor shift;
  /// Total / fidelity loss at each evaluation, in order.
  std::vector<double> losses;
  std::vector<double> fidelities;
};

/// Repeated gradient descent on `point` (a copy is updated, never the
/// argument). Blind AffineLight parameters in `observations` are updated in
/// lock-step when cfg.optimize_params is set.
InnerLoopResult run_inner_loop(const ImageTensor& point, std::span<Observation> observations,
                               const GuidanceConfig& cfg, int t);

struct StepResult {
  ImageTensor x_prev;
  double loss_total = 0.0;
  double loss_fidelity = 0.0;
};

/// One guided reverse step given an already computed noise prediction.
/// Noise for x_{t-1} comes from `rng`; t == 1 returns the mean.
StepResult guided_step_from_eps(const ImageTensor& x_t, const ImageTensor& eps_hat, int t,
                                const NoiseSchedule& sched, std::span<Observation> observations,
                                const GuidanceConfig& cfg, SeededRng& rng);

StepResult guidance_step(const EpsilonModel& model, std::span<Observation> observations,
                         const ImageTensor& x_t, int t, const NoiseSchedule& sched,
                         const GuidanceConfig& cfg, SeededRng& rng);

/// f ~ U[0.5, 1.5], M ~ U[-0.1, 0.1] per entry; one pair per observation.
std::vector<AffineLight> init_blind_params(SeededRng& rng, Shape shape, int n_observations);

/// Largest guidance scale for which plain descent on the reconstruction
/// term is guaranteed to decrease it (2 / lambda_max of its Hessian).
double guidance_stability_bound(std::span<const Observation> observations, const Shape& domain,
                                const LossWeights& w);

}  // namespace gdp
