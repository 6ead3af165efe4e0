#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "gdp/guidance.hpp"
#include "test_util.hpp"

using namespace gdp;
using testutil::uniform_image;

namespace {

const std::vector<GuidanceVariant> kAll{GuidanceVariant::X0, GuidanceVariant::Xt, GuidanceVariant::X0V1,
                                        GuidanceVariant::XtV1};

}  // namespace

TEST_CASE("variant names round-trip") {
  for (auto v : kAll) CHECK(parse_variant(variant_name(v)) == v);
  CHECK(parse_variant("x0") == GuidanceVariant::X0);
  CHECK(parse_variant("XT-V1") == GuidanceVariant::XtV1);
  CHECK(variant_name(GuidanceVariant::XtV1) == "GDP-xt-v1");
  CHECK_THROWS(parse_variant("x1"));
}

TEST_CASE("zero shift reduces every variant to the posterior mean") {
  const NoiseSchedule sched = make_linear_schedule();
  SeededRng rng(1);
  const Shape s{3, 4, 4};
  const ImageTensor zero(s);
  for (int trial = 0; trial < 10; ++trial) {
    const int t = 1 + static_cast<int>(rng.below(1000));
    const ImageTensor xt = gaussian_image(rng, s);
    const ImageTensor x0 = gaussian_image(rng, s);
    const ImageTensor ref = posterior_mean_var(xt, x0, t, sched).mean;
    for (auto v : kAll) {
      const ImageTensor m = guided_mean(v, xt, x0, zero, t, sched, false);
      for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(m[i] - ref[i]) <= 1e-12);
    }
  }
}

TEST_CASE("X0 minus X0V1 equals (1 - c1) shift; Xt minus XtV1 equals (1 - c2) shift") {
  const NoiseSchedule sched = make_linear_schedule();
  SeededRng rng(2);
  const Shape s{1, 4, 4};
  for (int t : {500, 1, 2, 999, 1000}) {
    const ImageTensor xt = gaussian_image(rng, s);
    const ImageTensor x0 = gaussian_image(rng, s);
    const ImageTensor shift = gaussian_image(rng, s);
    const auto c = posterior_coefficients(t, sched);
    const ImageTensor a = guided_mean(GuidanceVariant::X0, xt, x0, shift, t, sched, false);
    const ImageTensor b = guided_mean(GuidanceVariant::X0V1, xt, x0, shift, t, sched, false);
    const ImageTensor p = guided_mean(GuidanceVariant::Xt, xt, x0, shift, t, sched, false);
    const ImageTensor q = guided_mean(GuidanceVariant::XtV1, xt, x0, shift, t, sched, false);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(std::abs((double(a[i]) - b[i]) - (1.0 - c.x0_coef) * shift[i]) <= 1e-6);
      CHECK(std::abs((double(p[i]) - q[i]) - (1.0 - c.xt_coef) * shift[i]) <= 1e-6);
    }
  }
}

TEST_CASE("t = 1 collapses X0 and X0V1 to x0 + shift") {
  const NoiseSchedule sched = make_linear_schedule();
  SeededRng rng(3);
  const Shape s{1, 2, 2};
  const ImageTensor xt = gaussian_image(rng, s), x0 = gaussian_image(rng, s), sh = gaussian_image(rng, s);
  const ImageTensor a = guided_mean(GuidanceVariant::X0, xt, x0, sh, 1, sched, false);
  const ImageTensor b = guided_mean(GuidanceVariant::X0V1, xt, x0, sh, 1, sched, false);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(a[i] == doctest::Approx(x0[i] + sh[i]));
    CHECK(b[i] == doctest::Approx(x0[i] + sh[i]));
  }
}

TEST_CASE("use_sigma premultiplies the shift by beta_tilde") {
  const NoiseSchedule sched = make_linear_schedule();
  SeededRng rng(4);
  const Shape s{1, 2, 2};
  const ImageTensor xt = gaussian_image(rng, s), x0 = gaussian_image(rng, s), sh = gaussian_image(rng, s);
  const int t = 300;
  const ImageTensor with = guided_mean(GuidanceVariant::X0, xt, x0, sh, t, sched, true);
  const ImageTensor scaled = guided_mean(GuidanceVariant::X0, xt, x0,
                                         static_cast<float>(sched.beta_tilde(t)) * sh, t, sched, false);
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(with[i] == doctest::Approx(scaled[i]).epsilon(1e-6));
}

TEST_CASE("inner loop: one step is -s grad, several steps are monotone below the bound") {
  SeededRng rng(5);
  const Shape s{3, 8, 8};
  std::vector<Observation> obs{{BlurUniform{3}, uniform_image(rng, s)}};
  const ImageTensor x = uniform_image(rng, s);
  GuidanceConfig cfg;
  cfg.scale = 7.0;
  const auto one = run_inner_loop(x, obs, cfg, 10);
  const auto g = total_guidance_loss(obs, x, cfg.weights);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(one.shift[i] == doctest::Approx(-7.0 * g.grad[i]).epsilon(1e-5));

  const double bound = guidance_stability_bound(obs, s, cfg.weights);
  for (double sc : {0.1, 0.5 * bound}) {
    cfg.scale = sc;
    cfg.inner_steps = 10;
    const auto r = run_inner_loop(x, obs, cfg, 10);
    REQUIRE(r.losses.size() == 10);
    for (std::size_t k = 1; k < r.losses.size(); ++k) CHECK(r.losses[k] <= r.losses[k - 1]);
  }
}

TEST_CASE("stability bound matches analytic spectra") {
  SeededRng rng(6);
  const Shape s{1, 8, 8};
  const std::vector<Observation> mask{{Mask{make_random_mask(rng, s, 0.25)}, ImageTensor(s)}};
  CHECK(guidance_stability_bound(mask, s, LossWeights{}) == doctest::Approx(64.0).epsilon(1e-6));
  // Block averaging: J^T J has top eigenvalue 1 / f^2 and N = 64 / f^2.
  const std::vector<Observation> down{{DownsampleAvg{2}, ImageTensor(Shape{1, 4, 4})}};
  CHECK(guidance_stability_bound(down, s, LossWeights{}) == doctest::Approx(64.0).epsilon(1e-6));
  CHECK(std::isinf(guidance_stability_bound({}, s, LossWeights{})));
}

TEST_CASE("guided step with s = 0 equals the unguided step for the same seed") {
  const NoiseSchedule sched = make_linear_schedule();
  SeededRng rng(7);
  const Shape s{1, 4, 4};
  const ImageTensor xt = gaussian_image(rng, s), eps = gaussian_image(rng, s);
  std::vector<Observation> obs{{BlurUniform{3}, uniform_image(rng, s)}};
  GuidanceConfig cfg;
  for (auto v : kAll) {
    cfg.variant = v;
    SeededRng a(99), b(99);
    const auto r = guided_step_from_eps(xt, eps, 400, sched, obs, cfg, a);
    ImageTensor want = posterior_mean_var(xt, predict_x0(xt, eps, 400, sched), 400, sched).mean;
    want.axpy(static_cast<float>(std::sqrt(sched.beta_tilde(400))), gaussian_image(b, s));
    CHECK(r.x_prev.values() == want.values());
  }
  // t = 1 returns the mean without noise.
  SeededRng c(1);
  const auto last = guided_step_from_eps(xt, eps, 1, sched, obs, cfg, c);
  CHECK(last.x_prev.values() == predict_x0(xt, eps, 1, sched).values());
}

TEST_CASE("clean-estimate guidance leaves the latent argument untouched") {
  const NoiseSchedule sched = make_linear_schedule();
  SeededRng rng(8);
  const Shape s{1, 4, 4};
  const GaussianMixturePrior prior({{1.0, ImageTensor(s, 0.5f), 0.04}});
  const ImageTensor xt = gaussian_image(rng, s);
  const ImageTensor copy = xt;
  std::vector<Observation> obs{{BlurUniform{3}, uniform_image(rng, s)}};
  GuidanceConfig cfg;
  cfg.scale = 2.0;
  cfg.inner_steps = 3;
  SeededRng noise(3);
  const auto r = guidance_step(prior, obs, xt, 200, sched, cfg, noise);
  CHECK(xt.values() == copy.values());
  CHECK(r.x_prev.all_finite());
  CHECK(r.loss_total > 0.0);
}

TEST_CASE("non-finite loss aborts") {
  const NoiseSchedule sched = make_linear_schedule();
  const Shape s{1, 2, 2};
  ImageTensor bad(s);
  bad[1] = std::numeric_limits<float>::quiet_NaN();
  std::vector<Observation> obs{{BlurUniform{1}, bad}};
  GuidanceConfig cfg;
  cfg.scale = 1.0;
  SeededRng rng(1);
  CHECK_THROWS_WITH_AS(guided_step_from_eps(ImageTensor(s), ImageTensor(s), 10, sched, obs, cfg, rng),
                       doctest::Contains("t=10"), std::runtime_error);
}

TEST_CASE("config validation") {
  GuidanceConfig cfg;
  cfg.scale = -1.0;
  CHECK_THROWS(validate(cfg));
  cfg = {};
  cfg.inner_steps = 0;
  CHECK_THROWS(validate(cfg));
  cfg = {};
  cfg.optimize_params = true;
  cfg.lr_factor = 0.0;
  CHECK_THROWS(validate(cfg));
  cfg = {};
  cfg.weights.color = -1.0;
  CHECK_THROWS(validate(cfg));
}

TEST_CASE("blind parameter initialization") {
  SeededRng a(5), b(5);
  const auto pa = init_blind_params(a, Shape{3, 4, 4}, 3);
  const auto pb = init_blind_params(b, Shape{3, 4, 4}, 3);
  REQUIRE(pa.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(pa[i].factor == pb[i].factor);
    CHECK(pa[i].offset.values() == pb[i].offset.values());
  }
  CHECK(pa[0].factor != pa[1].factor);
  SeededRng r(6);
  double lo = 10, hi = -10, mlo = 10, mhi = -10;
  for (int i = 0; i < 10000; ++i) {
    const auto p = init_blind_params(r, Shape{1, 1, 1}, 1).front();
    lo = std::min(lo, p.factor);
    hi = std::max(hi, p.factor);
    mlo = std::min(mlo, double(p.offset[0]));
    mhi = std::max(mhi, double(p.offset[0]));
  }
  CHECK(lo >= 0.5);
  CHECK(hi <= 1.5);
  CHECK(mlo >= -0.1);
  CHECK(mhi <= 0.1);
  CHECK_THROWS(init_blind_params(r, Shape{1, 1, 1}, 0));
}

TEST_CASE("blind parameter oracle: known x, 200 steps recover f and the bias") {
  SeededRng rng(9);
  const Shape s{3, 16, 16};
  for (double f_true : {0.3, 0.4, 0.8, 1.2}) {
    const ImageTensor x = uniform_image(rng, s);
    const ImageTensor m_true(s, 0.1f);
    std::vector<Observation> obs{{init_blind_params(rng, s, 1).front(), apply(AffineLight{f_true, m_true}, x)}};
    GuidanceConfig cfg;
    cfg.optimize_params = true;
    cfg.scale = 0.0;  // x stays fixed: parameters only
    cfg.inner_steps = 200;
    cfg.weights.illumination = 1.0;
    run_inner_loop(x, obs, cfg, 1);
    const AffineLight* est = obs.front().degradation.affine_light();
    CHECK(std::abs(est->factor - f_true) <= 0.05);
    CHECK(std::abs(mean(est->offset - m_true)) <= 0.05);
  }
}

TEST_CASE("optimize_params needs an affine observation") {
  SeededRng rng(10);
  const Shape s{1, 4, 4};
  std::vector<Observation> obs{{BlurUniform{3}, ImageTensor(s)}};
  GuidanceConfig cfg;
  cfg.optimize_params = true;
  CHECK_THROWS(run_inner_loop(ImageTensor(s), obs, cfg, 5));
}
