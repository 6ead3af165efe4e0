#include "gdp/app/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gdp/degradation.hpp"
#include "gdp/denoiser.hpp"
#include "gdp/losses.hpp"
#include "gdp/metrics.hpp"
#include "gdp/sampler.hpp"

namespace gdp::app {

namespace {

using AdjointFn = std::function<ImageTensor(const DegradationModel&, const ImageTensor&, const Shape&)>;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-30});
  return std::abs(a - b) / scale;
}

ImageTensor uniform_image(SeededRng& rng, Shape s, double lo = 0.0, double hi = 1.0) {
  ImageTensor img(s);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(rng.uniform(lo, hi));
  return img;
}

std::vector<std::pair<std::string, DegradationModel>> operator_zoo(SeededRng& rng, Shape domain) {
  SeededRng mrng = rng.split(1);
  const ImageTensor mask3 = make_random_mask(mrng, domain, 0.25);
  const ImageTensor mask1 = make_random_mask(mrng, Shape{1, domain.height, domain.width}, 0.5);
  const ImageTensor offset = uniform_image(rng, domain, -0.1, 0.1);
  std::vector<std::pair<std::string, DegradationModel>> zoo;
  zoo.emplace_back("down:4", DownsampleAvg{4});
  zoo.emplace_back("blur:9", BlurUniform{9});
  zoo.emplace_back("gray", Grayscale{});
  zoo.emplace_back("mask", Mask{mask3});
  zoo.emplace_back("light", AffineLight{0.4, offset});
  zoo.emplace_back("blur:5,down:2", Compose{{BlurUniform{5}, DownsampleAvg{2}}});
  zoo.emplace_back("gray,mask", Compose{{Grayscale{}, Mask{mask1}}});
  zoo.emplace_back("light,blur:3,down:4", Compose{{AffineLight{0.7, offset}, BlurUniform{3}, DownsampleAvg{4}}});
  return zoo;
}

void adjoint_suite(std::vector<CheckResult>& out, const AdjointFn& adj) {
  SeededRng rng(0xad70);
  const Shape domain{3, 16, 16};
  for (const auto& [name, op] : operator_zoo(rng, domain)) {
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
      // Positive probes keep both inner products free of cancellation.
      const ImageTensor x = uniform_image(rng, domain, 0.1, 1.0);
      const ImageTensor v = uniform_image(rng, output_shape(op, domain), 0.1, 1.0);
      // Adjoint of the linear part: subtract D(0) to drop affine offsets.
      const ImageTensor dx = apply(op, x) - apply(op, ImageTensor(domain));
      worst = std::max(worst, rel_err(dot(dx, v), dot(x, adj(op, v, domain))));
    }
    out.push_back({"adjoints", name, worst <= 1e-6, "max rel err " + fmt(worst)});
  }
}

// Directional central difference along a direction whose signs follow the
// analytic gradient, so the directional derivative cannot cancel to ~0. The
// realized perturbation (after float rounding) is used on the analytic side.
double directional_error(const std::function<LossValue(const ImageTensor&)>& f, const ImageTensor& x,
                         SeededRng& rng, double h) {
  const ImageTensor g = f(x).grad;
  ImageTensor dir(x.shape());
  for (std::size_t i = 0; i < dir.size(); ++i) {
    const double u = rng.uniform(0.5, 1.0);
    dir[i] = static_cast<float>(g[i] < 0.0f ? -u : u);
  }
  const ImageTensor xp = x + static_cast<float>(h) * dir;
  const ImageTensor xm = x - static_cast<float>(h) * dir;
  const double fd = f(xp).value - f(xm).value;
  const double an = dot(g, xp - xm);
  return rel_err(fd, an);
}

void gradient_suite(std::vector<CheckResult>& out) {
  SeededRng rng(0x96ad);
  const Shape s{3, 16, 16};
  const double h = 1e-3;
  auto check = [&](const std::string& name, const std::function<LossValue(const ImageTensor&)>& f,
                   double lo, double hi) {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const ImageTensor x = uniform_image(rng, s, lo, hi);
      worst = std::max(worst, directional_error(f, x, rng, h));
    }
    out.push_back({"gradients", name, worst <= 1e-4, "max rel err " + fmt(worst)});
  };
  const ImageTensor target = uniform_image(rng, s);
  check("mse", [&](const ImageTensor& x) { return mse_loss(x, target); }, 0.0, 1.0);
  // Exposure is piecewise smooth; a dark range keeps every region below E.
  check("exposure", [](const ImageTensor& x) { return exposure_loss(x, 0.5); }, 0.0, 0.3);
  check("color_constancy", [](const ImageTensor& x) { return color_constancy_loss(x); }, 0.0, 1.0);
  check("illumination_smoothness", [](const ImageTensor& x) { return illumination_smoothness_loss(x); },
        -0.2, 0.2);

  SeededRng zrng = rng.split(7);
  for (const auto& [name, op] : operator_zoo(zrng, s)) {
    const ImageTensor y = uniform_image(rng, output_shape(op, s));
    check("fidelity " + name, [&](const ImageTensor& x) {
      auto g = grad_fidelity(op, x, y);
      return LossValue{g.loss, std::move(g.grad)};
    }, 0.0, 1.0);
  }

  LossWeights w{1.0, 0.01, 0.005, 0.0, 0.5};
  const std::vector<Observation> obs{{DownsampleAvg{4}, uniform_image(rng, Shape{3, 4, 4})},
                                     {BlurUniform{3}, uniform_image(rng, s)}};
  check("total", [&](const ImageTensor& x) {
    auto g = total_guidance_loss(obs, x, w);
    return LossValue{g.total, std::move(g.grad)};
  }, 0.0, 0.4);

  // Affine parameters: perturb (f, M) jointly along a random direction.
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const ImageTensor x = uniform_image(rng, s);
    const ImageTensor y = uniform_image(rng, s);
    const double f = rng.uniform(0.2, 1.2);
    const ImageTensor m = uniform_image(rng, s, -0.1, 0.1);
    const double df = rng.normal();
    const ImageTensor dm = gaussian_image(rng, s);
    const ImageTensor mp = m + static_cast<float>(h) * dm;
    const ImageTensor mm = m - static_cast<float>(h) * dm;
    const double fd = grad_affine_params(f + h * df, mp, x, y).loss - grad_affine_params(f - h * df, mm, x, y).loss;
    const auto g = grad_affine_params(f, m, x, y);
    const double an = g.d_factor * 2.0 * h * df + dot(g.d_offset, mp - mm);
    worst = std::max(worst, rel_err(fd, an));
  }
  out.push_back({"gradients", "affine params", worst <= 1e-4, "max rel err " + fmt(worst)});
}

void conjugate_suite(std::vector<CheckResult>& out) {
  const Shape s{1, 4, 4};
  const double mu0 = 0.5;
  const double var0 = 0.04;
  auto prior = std::make_shared<GaussianMixturePrior>(
      std::vector<MixtureComponent>{{1.0, ImageTensor(s, static_cast<float>(mu0)), var0}});
  ImageTensor mask(s, 1.0f);
  for (std::size_t i = 0; i < mask.size(); i += 2) mask[i] = 0.0f;
  ImageTensor y(s);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = mask[i] * (0.2f + 0.05f * static_cast<float>(i));

  const int chains = 200;
  std::vector<ImageTensor> samples(chains);
  SamplerRun base;
  base.model = prior;
  base.cfg.scale = 1.0;
  base.cfg.inner_steps = 1;
  base.observations = {{Mask{mask}, y}};
  for (int c = 0; c < chains; ++c) {
    SamplerRun run = base;
    run.seed = 1000 + static_cast<std::uint64_t>(c);
    samples[c] = sample(run).x0;
  }
  int bad = 0;
  double worst_z = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double m = 0.0, m2 = 0.0;
    for (const auto& x : samples) {
      m += x[i];
      m2 += static_cast<double>(x[i]) * x[i];
    }
    m /= chains;
    const double var = std::max(m2 / chains - m * m, 0.0) * chains / (chains - 1);
    const double se = std::sqrt(var / chains);
    const double target = mask[i] > 0.0f ? static_cast<double>(y[i]) : mu0;
    const double z = std::abs(m - target) / std::max(se, 1e-12);
    worst_z = std::max(worst_z, z);
    if (z > 3.0) ++bad;
  }
  out.push_back({"conjugate", "posterior mean (200 chains)", bad == 0, "max |z| " + fmt(worst_z)});
}

void patch_suite(std::vector<CheckResult>& out) {
  const Shape s{1, 8, 8};
  SeededRng rng(0x9a7c);
  std::vector<ImageTensor> data;
  for (int k = 0; k < 4; ++k) data.push_back(uniform_image(rng, s));
  SamplerRun run;
  run.model = std::make_shared<EmpiricalPrior>(data);
  run.sched = make_linear_schedule(100);
  run.seed = 42;
  run.cfg.scale = 4.0;
  run.cfg.inner_steps = 2;
  SeededRng mrng(3);
  const ImageTensor mask = make_random_mask(mrng, s, 0.25);
  run.observations = {{Mask{mask}, apply(Mask{mask}, data[0])}};
  const ImageTensor plain = sample(run).x0;
  run.patch = PatchConfig{8, 4};
  const ImageTensor patched = sample_patched(run).x0;
  const bool same = std::equal(plain.values().begin(), plain.values().end(), patched.values().begin());
  out.push_back({"patch", "single patch equals plain sampler", same, same ? "bit-identical" : "differs"});

  const PatchConfig p{8, 4};
  const auto count = patch_coverage(16, 16, p);
  double worst = 0.0;
  for (int c : count) worst = std::max(worst, std::abs(c * (1.0 / c) - 1.0));
  const bool four = count[static_cast<std::size_t>(6) * 16 + 6] == 4;
  out.push_back({"patch", "overlap weights sum to 1 (r = p/2)", worst == 0.0 && four,
                 "center coverage " + std::to_string(count[6 * 16 + 6])});
}

void metrics_suite(std::vector<CheckResult>& out) {
  SeededRng rng(0x3e7);
  const ImageTensor a = uniform_image(rng, Shape{3, 16, 16});
  out.push_back({"metrics", "psnr(a,a) infinite", std::isinf(psnr(a, a)), format_psnr(psnr(a, a))});
  const ImageTensor b = a + ImageTensor(a.shape(), 0.1f);
  const double p = psnr(a, b);
  out.push_back({"metrics", "psnr at mse 0.01", std::abs(p - 20.0) < 1e-4, fmt(p)});
  const double ss = ssim(a, a);
  out.push_back({"metrics", "ssim(a,a)", std::abs(ss - 1.0) < 1e-12, fmt(ss)});
  const ImageTensor e(Shape{1, 1, 2}, std::vector<float>{0.2f, 0.8f});
  const ImageTensor r(Shape{1, 1, 2}, std::vector<float>{0.8f, 0.2f});
  out.push_back({"metrics", "loe two-pixel case", loe(e, r, 0) == 1.0, fmt(loe(e, r, 0))});
  out.push_back({"metrics", "loe(a,a)", loe(a, a, 0) == 0.0, fmt(loe(a, a, 0))});
}

}  // namespace

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names{"adjoints", "gradients", "conjugate", "patch", "metrics"};
  return names;
}

std::vector<CheckResult> run_verify(const std::vector<std::string>& suites, const std::string& fault) {
  if (!fault.empty() && fault != "adjoint") throw std::invalid_argument("unknown fault '" + fault + "'");
  AdjointFn adj = [](const DegradationModel& d, const ImageTensor& v, const Shape& domain) {
    return adjoint(d, v, domain);
  };
  if (fault == "adjoint") {
    adj = [](const DegradationModel& d, const ImageTensor& v, const Shape& domain) {
      return 1.01f * adjoint(d, v, domain);
    };
  }
  std::vector<CheckResult> out;
  for (const auto& s : suites) {
    if (s == "adjoints") adjoint_suite(out, adj);
    else if (s == "gradients") gradient_suite(out);
    else if (s == "conjugate") conjugate_suite(out);
    else if (s == "patch") patch_suite(out);
    else if (s == "metrics") metrics_suite(out);
    else throw std::invalid_argument("unknown verify suite '" + s + "'");
  }
  return out;
}

int cmd_verify(const RunConfig& cfg, std::ostream& out) {
  std::vector<std::string> suites;
  if (cfg.only.empty()) {
    suites = verify_suites();
  } else {
    std::stringstream ss(cfg.only);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) suites.push_back(item);
    }
  }
  const auto results = run_verify(suites, cfg.inject_fault);
  int failed = 0;
  for (const auto& r : results) {
    out << (r.pass ? "PASS" : "FAIL") << '\t' << r.suite << '\t' << r.name << '\t' << r.detail << '\n';
    if (!r.pass) ++failed;
  }
  out << (failed == 0 ? "all " + std::to_string(results.size()) + " checks passed"
                      : std::to_string(failed) + " of " + std::to_string(results.size()) + " checks failed")
      << '\n';
  return failed == 0 ? 0 : 1;
}

}  // namespace gdp::app
