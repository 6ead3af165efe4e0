#include "gdp/guidance.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gdp {

std::string variant_name(GuidanceVariant v) {
  switch (v) {
    case GuidanceVariant::X0: return "GDP-x0";
    case GuidanceVariant::Xt: return "GDP-xt";
    case GuidanceVariant::X0V1: return "GDP-x0-v1";
    case GuidanceVariant::XtV1: return "GDP-xt-v1";
  }
  return "unknown";
}

GuidanceVariant parse_variant(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s.rfind("gdp-", 0) == 0) s = s.substr(4);
  if (s == "x0") return GuidanceVariant::X0;
  if (s == "xt") return GuidanceVariant::Xt;
  if (s == "x0-v1") return GuidanceVariant::X0V1;
  if (s == "xt-v1") return GuidanceVariant::XtV1;
  throw std::invalid_argument("unknown guidance variant '" + name + "'");
}

void validate(const GuidanceConfig& cfg) {
  if (!(cfg.scale >= 0.0)) throw std::invalid_argument("guidance scale must be >= 0");
  if (cfg.inner_steps < 1) throw std::invalid_argument("inner_steps must be >= 1");
  const auto& w = cfg.weights;
  if (w.mse < 0 || w.exposure < 0 || w.color < 0 || w.illumination < 0) {
    throw std::invalid_argument("loss weights must be >= 0");
  }
  if (cfg.optimize_params && !(cfg.lr_factor > 0.0 && cfg.lr_offset > 0.0)) {
    throw std::invalid_argument("parameter learning rates must be positive");
  }
}

ImageTensor guided_mean(GuidanceVariant variant, const ImageTensor& x_t, const ImageTensor& x0_tilde,
                        const ImageTensor& shift, int t, const NoiseSchedule& sched, bool use_sigma) {
  require_same_shape(x_t.shape(), x0_tilde.shape(), "guided_mean");
  require_same_shape(x_t.shape(), shift.shape(), "guided_mean");
  const auto c = posterior_coefficients(t, sched);
  const double k = use_sigma ? c.variance : 1.0;
  ImageTensor out(x_t.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double s = k * shift[i];
    double m = 0.0;
    switch (variant) {
      case GuidanceVariant::X0:
      case GuidanceVariant::Xt: m = c.x0_coef * x0_tilde[i] + c.xt_coef * x_t[i] + s; break;
      case GuidanceVariant::X0V1: m = c.x0_coef * (x0_tilde[i] + s) + c.xt_coef * x_t[i]; break;
      case GuidanceVariant::XtV1: m = c.x0_coef * x0_tilde[i] + c.xt_coef * (x_t[i] + s); break;
    }
    out[i] = static_cast<float>(m);
  }
  return out;
}

namespace {

void update_blind_params(std::span<Observation> observations, const ImageTensor& x,
                         const GuidanceConfig& cfg) {
  bool any = false;
  for (auto& obs : observations) {
    AffineLight* light = obs.degradation.affine_light();
    if (light == nullptr) continue;
    any = true;
    const auto g = grad_affine_params(light->factor, light->offset, x, obs.y);
    const double half_n = 0.5 * static_cast<double>(x.size());
    ImageTensor step = static_cast<float>(cfg.weights.mse * half_n) * ImageTensor(g.d_offset);
    if (cfg.weights.illumination != 0.0) {
      step.axpy(static_cast<float>(cfg.weights.illumination),
                illumination_smoothness_loss(light->offset).grad);
    }
    light->factor -= cfg.lr_factor * cfg.weights.mse * g.d_factor;
    light->offset.axpy(static_cast<float>(-cfg.lr_offset), step);
  }
  if (!any) {
    throw std::invalid_argument("optimize_params requires at least one AffineLight observation");
  }
}

}  // namespace

InnerLoopResult run_inner_loop(const ImageTensor& point, std::span<Observation> observations,
                               const GuidanceConfig& cfg, int t) {
  ImageTensor cur = point;
  InnerLoopResult res{ImageTensor(point.shape()), {}, {}};
  for (int k = 0; k < cfg.inner_steps; ++k) {
    auto loss = total_guidance_loss(observations, cur, cfg.weights);
    if (!std::isfinite(loss.total) || !loss.grad.all_finite()) {
      throw std::runtime_error("non-finite guidance loss at t=" + std::to_string(t) +
                               " inner step " + std::to_string(k));
    }
    res.losses.push_back(loss.total);
    res.fidelities.push_back(loss.fidelity);
    if (cfg.optimize_params) update_blind_params(observations, cur, cfg);
    cur.axpy(static_cast<float>(-cfg.scale), loss.grad);
  }
  res.shift = cur - point;
  return res;
}

StepResult guided_step_from_eps(const ImageTensor& x_t, const ImageTensor& eps_hat, int t,
                                const NoiseSchedule& sched, std::span<Observation> observations,
                                const GuidanceConfig& cfg, SeededRng& rng) {
  const ImageTensor x0 = predict_x0(x_t, eps_hat, t, sched);
  StepResult out;
  ImageTensor mean;
  const bool guided = !observations.empty() && (cfg.scale > 0.0 || cfg.optimize_params);
  if (guided) {
    const ImageTensor& point = guides_clean_estimate(cfg.variant) ? x0 : x_t;
    auto inner = run_inner_loop(point, observations, cfg, t);
    out.loss_total = inner.losses.back();
    out.loss_fidelity = inner.fidelities.back();
    mean = guided_mean(cfg.variant, x_t, x0, inner.shift, t, sched, cfg.use_sigma);
  } else {
    mean = posterior_mean_var(x_t, x0, t, sched).mean;
  }
  if (t > 1) {
    const double sd = std::sqrt(sched.beta_tilde(t));
    mean.axpy(static_cast<float>(sd), gaussian_image(rng, x_t.shape()));
  }
  if (!mean.all_finite()) {
    throw std::runtime_error("non-finite sampler state at t=" + std::to_string(t));
  }
  out.x_prev = std::move(mean);
  return out;
}

StepResult guidance_step(const EpsilonModel& model, std::span<Observation> observations,
                         const ImageTensor& x_t, int t, const NoiseSchedule& sched,
                         const GuidanceConfig& cfg, SeededRng& rng) {
  validate(cfg);
  const ImageTensor eps = model.predict_eps(x_t, t, sched);
  return guided_step_from_eps(x_t, eps, t, sched, observations, cfg, rng);
}

std::vector<AffineLight> init_blind_params(SeededRng& rng, Shape shape, int n_observations) {
  if (n_observations < 1) throw std::invalid_argument("init_blind_params: need n >= 1");
  require_valid(shape, "init_blind_params");
  std::vector<AffineLight> out;
  out.reserve(n_observations);
  for (int i = 0; i < n_observations; ++i) {
    AffineLight p{rng.uniform(0.5, 1.5), ImageTensor(shape)};
    for (auto& v : p.offset.data()) v = static_cast<float>(rng.uniform(-0.1, 0.1));
    out.push_back(std::move(p));
  }
  return out;
}

double guidance_stability_bound(std::span<const Observation> observations, const Shape& domain,
                                const LossWeights& w) {
  if (observations.empty() || w.mse <= 0.0) return std::numeric_limits<double>::infinity();
  // Power iteration on H = sum_i w (2 / N_i) J_i^T J_i.
  SeededRng rng(0x5eed);
  ImageTensor v = gaussian_image(rng, domain);
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double norm = std::sqrt(sum_squares(v));
    if (norm == 0.0) break;
    v *= static_cast<float>(1.0 / norm);
    ImageTensor hv(domain);
    for (const auto& obs : observations) {
      // Linear part only: difference of two applications removes any offset.
      ImageTensor jv = apply(obs.degradation, v) - apply(obs.degradation, ImageTensor(domain));
      const double n = static_cast<double>(obs.y.size());
      hv.axpy(static_cast<float>(w.mse * 2.0 / n), adjoint(obs.degradation, jv, domain));
    }
    lambda = dot(v, hv);
    v = std::move(hv);
  }
  return lambda > 0.0 ? 2.0 / lambda : std::numeric_limits<double>::infinity();
}

}  // namespace gdp
