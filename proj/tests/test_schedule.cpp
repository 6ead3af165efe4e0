#include <cmath>
#include <vector>

#include "doctest.h"
#include "gdp/schedule.hpp"
#include "test_util.hpp"

using namespace gdp;

TEST_CASE("linear schedule endpoints and invariants") {
  const NoiseSchedule s = make_linear_schedule(1000, 1e-4, 0.02);
  CHECK(s.steps() == 1000);
  CHECK(s.beta(1) == doctest::Approx(1e-4));
  CHECK(s.beta(1000) == doctest::Approx(0.02));
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.beta_tilde(1) == 0.0);
  for (int t = 1; t <= 1000; ++t) {
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
    const double rel = std::abs(s.alpha(t) * s.alpha_bar(t - 1) - s.alpha_bar(t)) / s.alpha_bar(t);
    CHECK(rel <= 1e-12);
  }
  // Independent oracle: sum of logs of the linearly spaced alphas.
  double log_sum = 0.0;
  for (int i = 0; i < 1000; ++i) log_sum += std::log1p(-(1e-4 + (0.02 - 1e-4) * i / 999.0));
  CHECK(s.alpha_bar(1000) < 1e-4);
  CHECK(std::abs(s.alpha_bar(1000) - std::exp(log_sum)) / std::exp(log_sum) <= 1e-10);
}

TEST_CASE("single-step schedule") {
  const NoiseSchedule s = make_linear_schedule(1, 0.5, 0.5);
  CHECK(s.alpha_bar(1) == doctest::Approx(0.5));
  CHECK(s.beta_tilde(1) == 0.0);
}

TEST_CASE("schedule bounds are enforced") {
  CHECK_THROWS(make_linear_schedule(0));
  CHECK_THROWS(make_linear_schedule(10, 0.0, 0.02));
  CHECK_THROWS(make_linear_schedule(10, 0.03, 0.02));
  CHECK_THROWS(make_linear_schedule(10, 1e-4, 1.0));
  const NoiseSchedule s = make_linear_schedule(10);
  CHECK_THROWS_AS(s.beta(0), std::out_of_range);
  CHECK_THROWS_AS(s.beta_tilde(11), std::out_of_range);
}

TEST_CASE("q_sample closed form") {
  const NoiseSchedule s({0.75});  // alpha_bar = 0.25
  const ImageTensor x0(Shape{1, 2, 2}, 0.8f);
  const ImageTensor zero(Shape{1, 2, 2});
  const ImageTensor scaled = q_sample(x0, 1, zero, s);
  for (float v : scaled.values()) CHECK(v == doctest::Approx(0.4f));
  const ImageTensor eps(Shape{1, 2, 2}, 2.0f);
  const ImageTensor noise_only = q_sample(zero, 1, eps, s);
  for (float v : noise_only.values()) CHECK(v == doctest::Approx(2.0 * std::sqrt(0.75)));
  CHECK_THROWS(q_sample(x0, 2, zero, s));
  CHECK_THROWS(q_sample(x0, 1, ImageTensor(Shape{1, 1, 2}), s));
}

TEST_CASE("predict_x0 inverts q_sample") {
  const NoiseSchedule s = make_linear_schedule();
  SeededRng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int t = 1 + static_cast<int>(rng.below(1000));
    const ImageTensor x0 = testutil::uniform_image(rng, Shape{1, 3, 3});
    const ImageTensor eps = gaussian_image(rng, Shape{1, 3, 3});
    const ImageTensor back = predict_x0(q_sample(x0, t, eps, s), eps, t, s);
    // Absolute error grows like 1/sqrt(alpha_bar) through float storage.
    const double tol = std::max(1e-5, 2e-7 / std::sqrt(s.alpha_bar(t)) * 4.0);
    for (std::size_t i = 0; i < x0.size(); ++i) CHECK(std::abs(back[i] - x0[i]) <= tol);
  }
}

TEST_CASE("predict_x0 matches scalar formula") {
  const NoiseSchedule s = make_linear_schedule();
  SeededRng rng(4);
  const ImageTensor xt = gaussian_image(rng, Shape{3, 4, 4});
  const ImageTensor eps = gaussian_image(rng, Shape{3, 4, 4});
  const ImageTensor x0 = predict_x0(xt, eps, 500, s);
  double ab = 1.0;
  for (int i = 0; i < 500; ++i) ab *= 1.0 - (1e-4 + (0.02 - 1e-4) * i / 999.0);
  for (std::size_t i = 0; i < xt.size(); ++i) {
    const double want = xt[i] / std::sqrt(ab) - std::sqrt(1.0 - ab) * eps[i] / std::sqrt(ab);
    CHECK(std::abs(x0[i] - want) <= 1e-6 * std::max(1.0, std::abs(want)));
  }
  const ImageTensor zero(Shape{3, 4, 4});
  const ImageTensor scaled = predict_x0(xt, zero, 500, s);
  CHECK(scaled[3] == doctest::Approx(xt[3] / std::sqrt(ab)));
}

TEST_CASE("posterior coefficients: hand values and t = 1 collapse") {
  const NoiseSchedule s({0.1, 0.2});
  const auto c = posterior_coefficients(2, s);
  CHECK(c.x0_coef == doctest::Approx(0.6776309271789385).epsilon(1e-14));
  CHECK(c.xt_coef == doctest::Approx(0.3194382824999699).epsilon(1e-14));
  CHECK(c.variance == doctest::Approx(0.07142857142857144).epsilon(1e-14));

  SeededRng rng(1);
  const ImageTensor x0 = gaussian_image(rng, Shape{1, 2, 3});
  const ImageTensor xt = gaussian_image(rng, Shape{1, 2, 3});
  const auto pm = posterior_mean_var(xt, x0, 1, s);
  CHECK(pm.mean.values() == x0.values());
  CHECK(pm.variance == 0.0);
}

TEST_CASE("posterior coefficients agree with a second evaluation") {
  const NoiseSchedule s = make_linear_schedule();
  for (int t : {2, 17, 250, 999, 1000}) {
    const auto c = posterior_coefficients(t, s);
    // Independent route: Gaussian product of q(x_t | x_{t-1}) and q(x_{t-1} | x0).
    const double ab_prev = s.alpha_bar(t - 1);
    const double prec = s.alpha(t) / s.beta(t) + 1.0 / (1.0 - ab_prev);
    const double var = 1.0 / prec;
    const double c_xt = var * std::sqrt(s.alpha(t)) / s.beta(t);
    const double c_x0 = var * std::sqrt(ab_prev) / (1.0 - ab_prev);
    CHECK(std::abs(c.xt_coef - c_xt) <= 1e-10 * c_xt);
    CHECK(std::abs(c.x0_coef - c_x0) <= 1e-10 * c_x0);
    CHECK(std::abs(c.variance - var) <= 1e-10 * var);
    const ImageTensor one(Shape{1, 1, 1}, 1.0f);
    CHECK(posterior_mean_var(one, one, t, s).mean[0] == doctest::Approx(c_x0 + c_xt));
  }
}

TEST_CASE("iterated single-step noising matches the closed-form marginal") {
  const NoiseSchedule s = make_linear_schedule();
  SeededRng rng(77);
  const int trials = 10000;
  const double x0 = 0.7;
  std::vector<double> sum(51, 0.0), sum2(51, 0.0);
  for (int n = 0; n < trials; ++n) {
    double x = x0;
    for (int t = 1; t <= 50; ++t) {
      x = std::sqrt(s.alpha(t)) * x + std::sqrt(s.beta(t)) * rng.normal();
      sum[t] += x;
      sum2[t] += x * x;
    }
  }
  for (int t : {1, 10, 25, 40, 50}) {
    const double m = sum[t] / trials;
    const double v = sum2[t] / trials - m * m;
    const double want_m = std::sqrt(s.alpha_bar(t)) * x0;
    const double want_v = 1.0 - s.alpha_bar(t);
    CHECK(std::abs(m - want_m) <= 3.0 * std::sqrt(want_v / trials));
    CHECK(std::abs(v - want_v) <= 0.1 * want_v);
  }
}

TEST_CASE("DDIM step") {
  const NoiseSchedule s = make_linear_schedule();
  SeededRng rng(9);
  const ImageTensor xt = gaussian_image(rng, Shape{1, 3, 3});
  const ImageTensor x0 = gaussian_image(rng, Shape{1, 3, 3});
  const ImageTensor eps = gaussian_image(rng, Shape{1, 3, 3});
  SeededRng r1(1), r2(2);
  const ImageTensor a = ddim_x_prev(xt, x0, eps, 50, 0, s, 0.0, r1);
  CHECK(a.values() == x0.values());
  const ImageTensor b1 = ddim_x_prev(xt, x0, eps, 500, 450, s, 0.0, r1);
  const ImageTensor b2 = ddim_x_prev(xt, x0, eps, 500, 450, s, 0.0, r2);
  CHECK(b1.values() == b2.values());
  CHECK(ddim_sigma(500, 450, 0.0, s) == 0.0);
  // eta = 1 with a single-step jump reproduces the DDPM posterior variance.
  CHECK(ddim_sigma(500, 499, 1.0, s) == doctest::Approx(std::sqrt(s.beta_tilde(500))));
  CHECK_THROWS(ddim_x_prev(xt, x0, eps, 10, 10, s, 0.0, r1));
  CHECK_THROWS(ddim_x_prev(xt, x0, eps, 10, 5, s, 1.5, r1));
}

TEST_CASE("DDIM skip grid") {
  const auto g = ddim_timesteps(1000, 20);
  REQUIRE(g.size() == 21);
  CHECK(g.front() == 1000);
  CHECK(g[1] == 950);
  CHECK(g[19] == 50);
  CHECK(g.back() == 0);
  const auto odd = ddim_timesteps(10, 3);  // stride 4
  CHECK(odd == std::vector<int>{10, 6, 2, 0});
}
