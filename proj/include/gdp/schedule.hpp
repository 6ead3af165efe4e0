#pragma once

#include <vector>

#include "gdp/image.hpp"
#include "gdp/rng.hpp"

namespace gdp {

/// Precomputed variance tables for a T-step forward process.
///
/// Steps are indexed 1..T. alpha_bar(0) == 1 is a sentinel so that the t = 1
/// posterior collapses onto the clean estimate.
class NoiseSchedule {
 public:
  /// betas[i] is beta at step i + 1; each must lie in (0, 1).
  explicit NoiseSchedule(std::vector<double> betas);

  int steps() const { return static_cast<int>(beta_.size()); }

  double beta(int t) const { return beta_.at(check(t) - 1); }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const;
  double beta_tilde(int t) const { return beta_tilde_.at(check(t) - 1); }

 private:
  int check(int t) const;

  std::vector<double> beta_;
  std::vector<double> alpha_bar_;  // indices 0..T
  std::vector<double> beta_tilde_;
};

/// Linear beta ramp inclusive of both endpoints.
NoiseSchedule make_linear_schedule(int steps = 1000, double beta_start = 1e-4,
                                   double beta_end = 0.02);

/// sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
ImageTensor q_sample(const ImageTensor& x0, int t, const ImageTensor& eps,
                     const NoiseSchedule& sched);

/// Clean-image estimate from a noisy sample and a noise prediction.
ImageTensor predict_x0(const ImageTensor& x_t, const ImageTensor& eps_hat, int t,
                       const NoiseSchedule& sched);

/// Coefficients of the forward-process posterior q(x_{t-1} | x_t, x0):
/// mean = x0_coef * x0 + xt_coef * x_t, variance = beta_tilde.
struct PosteriorCoefficients {
  double x0_coef;
  double xt_coef;
  double variance;
};

PosteriorCoefficients posterior_coefficients(int t, const NoiseSchedule& sched);

struct PosteriorMeanVar {
  ImageTensor mean;
  double variance;
};

PosteriorMeanVar posterior_mean_var(const ImageTensor& x_t, const ImageTensor& x0_tilde, int t,
                                    const NoiseSchedule& sched);

/// Noise scale of a DDIM jump t -> t_prev for the given eta.
double ddim_sigma(int t, int t_prev, double eta, const NoiseSchedule& sched);

/// One DDIM jump. With eta == 0 the step is deterministic and `rng` is not
/// touched; otherwise the noise is drawn from `rng`.
ImageTensor ddim_x_prev(const ImageTensor& x_t, const ImageTensor& x0_tilde,
                        const ImageTensor& eps_hat, int t, int t_prev, const NoiseSchedule& sched,
                        double eta, SeededRng& rng);

/// Descending visit list T, T - k, ... with stride k = ceil(T / steps),
/// terminated by 0.
std::vector<int> ddim_timesteps(int total_steps, int sample_steps);

}  // namespace gdp
