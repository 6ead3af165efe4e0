#include "gdp/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace gdp {

namespace {

constexpr std::uint64_t kInitStream = 0;

using EpsProvider = std::function<ImageTensor(const ImageTensor&, int)>;

Shape output_shape_of(const SamplerRun& run) {
  if (!run.model) throw std::invalid_argument("sampler: no model");
  return run.image_shape.value_or(run.model->native_shape());
}

TraceRecord make_record(int step, int t, const StepResult& r, std::span<const Observation> obs) {
  TraceRecord rec{step, t, r.loss_total, r.loss_fidelity, {}, 0.0};
  double abs_sum = 0.0;
  std::size_t n = 0;
  for (const auto& o : obs) {
    if (const auto* light = o.degradation.affine_light()) {
      rec.factors.push_back(light->factor);
      abs_sum += mean_abs(light->offset);
      ++n;
    }
  }
  rec.mean_abs_offset = n == 0 ? 0.0 : abs_sum / n;
  return rec;
}

SampleResult ddpm_loop(const SamplerRun& run, const Shape& shape, const EpsProvider& eps_fn) {
  validate(run.cfg);
  SampleResult res;
  res.observations = run.observations;
  const SeededRng chain(run.seed);
  SeededRng init = chain.split(kInitStream);
  ImageTensor x = gaussian_image(init, shape);
  const int T = run.sched.steps();
  for (int t = T, step = 0; t >= 1; --t, ++step) {
    const ImageTensor eps = eps_fn(x, t);
    SeededRng noise = chain.split(static_cast<std::uint64_t>(t));
    StepResult r = guided_step_from_eps(x, eps, t, run.sched, res.observations, run.cfg, noise);
    if (run.record_trace) res.trace.push_back(make_record(step, t, r, res.observations));
    x = std::move(r.x_prev);
  }
  res.x0 = std::move(x);
  return res;
}

void check_patch(const PatchConfig& p, const Shape& image, const Shape& native) {
  if (p.size < 1 || p.stride < 1 || p.stride > p.size) {
    throw std::invalid_argument("patch: need 1 <= stride <= size");
  }
  if (p.size > image.height || p.size > image.width) {
    throw std::invalid_argument("patch: size " + std::to_string(p.size) + " exceeds image " +
                                to_string(image));
  }
  if (!(native == Shape{image.channels, p.size, p.size})) {
    throw std::invalid_argument("patch: model native shape " + to_string(native) +
                                " does not match patch " + std::to_string(p.size));
  }
}

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
}

}  // namespace

SampleResult sample(const SamplerRun& run) {
  const Shape shape = output_shape_of(run);
  if (!(shape == run.model->native_shape())) {
    throw std::invalid_argument("sample: image " + to_string(shape) + " differs from model size " +
                                to_string(run.model->native_shape()) + "; use patched sampling");
  }
  const auto& model = *run.model;
  return ddpm_loop(run, shape, [&](const ImageTensor& x, int t) {
    return model.predict_eps(x, t, run.sched);
  });
}

SampleResult sample_ddim(const SamplerRun& run) {
  validate(run.cfg);
  const Shape shape = output_shape_of(run);
  if (!(shape == run.model->native_shape())) {
    throw std::invalid_argument("sample_ddim: image size must equal the model size");
  }
  const bool guided = !run.observations.empty() && (run.cfg.scale > 0.0 || run.cfg.optimize_params);
  if (guided && !guides_clean_estimate(run.cfg.variant)) {
    throw std::invalid_argument("sample_ddim: only clean-estimate (x0) guidance is supported");
  }
  SampleResult res;
  res.observations = run.observations;
  const SeededRng chain(run.seed);
  SeededRng init = chain.split(kInitStream);
  ImageTensor x = gaussian_image(init, shape);
  const auto grid = ddim_timesteps(run.sched.steps(), run.mode.ddim_steps);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const int t = grid[i];
    const int t_prev = grid[i + 1];
    const ImageTensor eps = run.model->predict_eps(x, t, run.sched);
    ImageTensor x0 = predict_x0(x, eps, t, run.sched);
    StepResult r;
    if (guided) {
      auto inner = run_inner_loop(x0, res.observations, run.cfg, t);
      x0 += inner.shift;
      r.loss_total = inner.losses.back();
      r.loss_fidelity = inner.fidelities.back();
    }
    SeededRng noise = chain.split(static_cast<std::uint64_t>(t));
    x = ddim_x_prev(x, x0, eps, t, t_prev, run.sched, run.mode.eta, noise);
    if (!x.all_finite()) throw std::runtime_error("non-finite sampler state at t=" + std::to_string(t));
    if (run.record_trace) res.trace.push_back(make_record(static_cast<int>(i), t, r, res.observations));
  }
  res.x0 = std::move(x);
  return res;
}

std::vector<int> patch_origins(int extent, int patch, int stride) {
  if (patch > extent) throw std::invalid_argument("patch_origins: patch larger than extent");
  std::vector<int> out;
  for (int o = 0; o + patch <= extent; o += stride) out.push_back(o);
  if (out.back() + patch < extent) out.push_back(extent - patch);
  return out;
}

std::vector<int> patch_coverage(int height, int width, const PatchConfig& patch) {
  std::vector<int> count(static_cast<std::size_t>(height) * width, 0);
  for (int oy : patch_origins(height, patch.size, patch.stride)) {
    for (int ox : patch_origins(width, patch.size, patch.stride)) {
      for (int y = oy; y < oy + patch.size; ++y) {
        for (int x = ox; x < ox + patch.size; ++x) ++count[static_cast<std::size_t>(y) * width + x];
      }
    }
  }
  return count;
}

ImageTensor patched_eps(const EpsilonModel& model, const ImageTensor& x_t, int t,
                        const NoiseSchedule& sched, const PatchConfig& patch) {
  check_patch(patch, x_t.shape(), model.native_shape());
  const auto ys = patch_origins(x_t.height(), patch.size, patch.stride);
  const auto xs = patch_origins(x_t.width(), patch.size, patch.stride);
  std::vector<std::pair<int, int>> origins;
  for (int oy : ys) {
    for (int ox : xs) origins.emplace_back(oy, ox);
  }
  std::vector<ImageTensor> preds(origins.size());
  parallel_for(origins.size(), [&](std::size_t i) {
    const auto [oy, ox] = origins[i];
    preds[i] = model.predict_eps(crop(x_t, oy, ox, patch.size, patch.size), t, sched);
  });
  // Fixed accumulation order keeps the result independent of scheduling.
  ImageTensor acc(x_t.shape());
  for (std::size_t i = 0; i < origins.size(); ++i) {
    const auto [oy, ox] = origins[i];
    for (int c = 0; c < x_t.channels(); ++c) {
      for (int y = 0; y < patch.size; ++y) {
        for (int x = 0; x < patch.size; ++x) acc.at(c, oy + y, ox + x) += preds[i].at(c, y, x);
      }
    }
  }
  const auto count = patch_coverage(x_t.height(), x_t.width(), patch);
  const std::size_t plane = x_t.shape().plane();
  for (int c = 0; c < x_t.channels(); ++c) {
    for (std::size_t p = 0; p < plane; ++p) acc[c * plane + p] /= static_cast<float>(count[p]);
  }
  return acc;
}

SampleResult sample_patched(const SamplerRun& run) {
  if (!run.patch) throw std::invalid_argument("sample_patched: no patch configuration");
  if (run.mode.kind == SamplingMode::Kind::Ddim) {
    throw std::invalid_argument("patched sampling with DDIM is not supported");
  }
  const Shape shape = output_shape_of(run);
  check_patch(*run.patch, shape, run.model->native_shape());
  const auto& model = *run.model;
  const PatchConfig patch = *run.patch;
  return ddpm_loop(run, shape, [&](const ImageTensor& x, int t) {
    return patched_eps(model, x, t, run.sched, patch);
  });
}

SampleResult run_sampler(const SamplerRun& run) {
  if (run.patch) return sample_patched(run);
  if (run.mode.kind == SamplingMode::Kind::Ddim) return sample_ddim(run);
  return sample(run);
}

HierarchicalResult hierarchical_restore(const SamplerRun& run, int base_size) {
  if (run.observations.empty()) throw std::invalid_argument("hierarchical_restore: no observations");
  for (const auto& o : run.observations) {
    if (o.degradation.affine_light() == nullptr) {
      throw std::invalid_argument("hierarchical_restore: observations must use AffineLight");
    }
  }
  const Shape full = run.observations.front().y.shape();
  const int short_side = std::min(full.height, full.width);
  if (base_size < 1 || base_size > short_side) {
    throw std::invalid_argument("hierarchical_restore: base size must be in [1, min(H, W)]");
  }
  const auto scaled = [&](int extent) {
    return std::max(1, static_cast<int>(std::lround(static_cast<double>(extent) * base_size / short_side)));
  };
  const Shape base{full.channels, scaled(full.height), scaled(full.width)};
  const Shape native = run.model->native_shape();

  SeededRng param_rng = SeededRng(run.seed).split(0xb11dULL);
  auto init = init_blind_params(param_rng, base, static_cast<int>(run.observations.size()));

  SamplerRun stage1 = run;
  stage1.mode = SamplingMode::ddpm();
  stage1.image_shape = base;
  stage1.cfg.optimize_params = true;
  stage1.observations.clear();
  for (std::size_t i = 0; i < run.observations.size(); ++i) {
    const ImageTensor& y = run.observations[i].y;
    stage1.observations.push_back({std::move(init[i]), resize_bilinear(y, base.height, base.width)});
  }
  if (base == native) stage1.patch.reset();
  const SampleResult r1 = stage1.patch ? sample_patched(stage1) : sample(stage1);

  HierarchicalResult out;
  out.stage1_trace = r1.trace;
  SamplerRun stage2 = run;
  stage2.mode = SamplingMode::ddpm();
  stage2.image_shape = full;
  stage2.cfg.optimize_params = false;
  stage2.observations.clear();
  for (std::size_t i = 0; i < run.observations.size(); ++i) {
    const AffineLight* est = r1.observations[i].degradation.affine_light();
    AffineLight frozen{est->factor, resize_bilinear(est->offset, full.height, full.width)};
    out.params.push_back(frozen);
    stage2.observations.push_back({std::move(frozen), run.observations[i].y});
  }
  if (full == native) stage2.patch.reset();
  SampleResult r2 = stage2.patch ? sample_patched(stage2) : sample(stage2);
  out.x0 = std::move(r2.x0);
  out.stage2_trace = std::move(r2.trace);
  return out;
}

void write_trace_tsv(std::ostream& os, const std::vector<TraceRecord>& trace) {
  const std::size_t nf = trace.empty() ? 0 : trace.front().factors.size();
  os << "step\tt\tloss_total\tloss_fidelity";
  for (std::size_t i = 0; i < nf; ++i) os << "\tf_" << (i + 1);
  os << "\tmean_abs_M\n";
  for (const auto& r : trace) {
    os << r.step << '\t' << r.t << '\t' << r.loss_total << '\t' << r.loss_fidelity;
    for (double f : r.factors) os << '\t' << f;
    os << '\t' << r.mean_abs_offset << '\n';
  }
}

}  // namespace gdp
