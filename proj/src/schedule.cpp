#include "gdp/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace gdp {

NoiseSchedule::NoiseSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
  if (beta_.empty()) throw std::invalid_argument("NoiseSchedule: need at least one step");
  alpha_bar_.assign(beta_.size() + 1, 1.0);
  beta_tilde_.assign(beta_.size(), 0.0);
  for (std::size_t i = 0; i < beta_.size(); ++i) {
    const double b = beta_[i];
    if (!(b > 0.0 && b < 1.0)) {
      throw std::invalid_argument("NoiseSchedule: beta must lie in (0, 1), got " + std::to_string(b));
    }
    alpha_bar_[i + 1] = alpha_bar_[i] * (1.0 - b);
    beta_tilde_[i] = (1.0 - alpha_bar_[i]) / (1.0 - alpha_bar_[i + 1]) * b;
  }
}

int NoiseSchedule::check(int t) const {
  if (t < 1 || t > steps()) {
    throw std::out_of_range("timestep " + std::to_string(t) + " outside [1, " +
                            std::to_string(steps()) + "]");
  }
  return t;
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  return alpha_bar_.at(check(t));
}

NoiseSchedule make_linear_schedule(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("make_linear_schedule: steps must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw std::invalid_argument("make_linear_schedule: need 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> betas(steps);
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    betas[i] = beta_start + (beta_end - beta_start) * frac;
  }
  return NoiseSchedule(std::move(betas));
}

ImageTensor q_sample(const ImageTensor& x0, int t, const ImageTensor& eps,
                     const NoiseSchedule& sched) {
  require_same_shape(x0.shape(), eps.shape(), "q_sample");
  const double ab = sched.alpha_bar(t);
  if (t == 0) throw std::out_of_range("q_sample: t must be >= 1");
  return lincomb(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps);
}

ImageTensor predict_x0(const ImageTensor& x_t, const ImageTensor& eps_hat, int t,
                       const NoiseSchedule& sched) {
  require_same_shape(x_t.shape(), eps_hat.shape(), "predict_x0");
  if (t == 0) throw std::out_of_range("predict_x0: t must be >= 1");
  const double ab = sched.alpha_bar(t);
  const double inv = 1.0 / std::sqrt(ab);
  return lincomb(inv, x_t, -std::sqrt(1.0 - ab) * inv, eps_hat);
}

PosteriorCoefficients posterior_coefficients(int t, const NoiseSchedule& sched) {
  const double ab = sched.alpha_bar(t);
  if (t == 0) throw std::out_of_range("posterior_coefficients: t must be >= 1");
  const double ab_prev = sched.alpha_bar(t - 1);
  const double denom = 1.0 - ab;
  return {std::sqrt(ab_prev) * sched.beta(t) / denom,
          std::sqrt(sched.alpha(t)) * (1.0 - ab_prev) / denom, sched.beta_tilde(t)};
}

PosteriorMeanVar posterior_mean_var(const ImageTensor& x_t, const ImageTensor& x0_tilde, int t,
                                    const NoiseSchedule& sched) {
  const auto c = posterior_coefficients(t, sched);
  return {lincomb(c.x0_coef, x0_tilde, c.xt_coef, x_t), c.variance};
}

double ddim_sigma(int t, int t_prev, double eta, const NoiseSchedule& sched) {
  const double ab = sched.alpha_bar(t);
  const double ab_prev = sched.alpha_bar(t_prev);
  return eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab)) * std::sqrt(1.0 - ab / ab_prev);
}

ImageTensor ddim_x_prev(const ImageTensor& x_t, const ImageTensor& x0_tilde,
                        const ImageTensor& eps_hat, int t, int t_prev, const NoiseSchedule& sched,
                        double eta, SeededRng& rng) {
  if (!(t_prev >= 0 && t_prev < t && t <= sched.steps())) {
    throw std::invalid_argument("ddim_x_prev: need 0 <= t_prev < t <= T");
  }
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("ddim_x_prev: eta must be in [0, 1]");
  require_same_shape(x_t.shape(), x0_tilde.shape(), "ddim_x_prev");
  require_same_shape(x_t.shape(), eps_hat.shape(), "ddim_x_prev");
  const double ab_prev = sched.alpha_bar(t_prev);
  const double sigma = ddim_sigma(t, t_prev, eta, sched);
  const double dir = std::sqrt(std::max(0.0, 1.0 - ab_prev - sigma * sigma));
  ImageTensor out = lincomb(std::sqrt(ab_prev), x0_tilde, dir, eps_hat);
  if (sigma > 0.0) {
    out.axpy(static_cast<float>(sigma), gaussian_image(rng, x_t.shape()));
  }
  return out;
}

std::vector<int> ddim_timesteps(int total_steps, int sample_steps) {
  if (sample_steps < 1 || sample_steps > total_steps) {
    throw std::invalid_argument("ddim_timesteps: need 1 <= steps <= T");
  }
  const int stride = (total_steps + sample_steps - 1) / sample_steps;
  std::vector<int> out;
  for (int t = total_steps; t > 0; t -= stride) out.push_back(t);
  out.push_back(0);
  return out;
}

}  // namespace gdp
