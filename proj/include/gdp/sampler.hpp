#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "gdp/denoiser.hpp"
#include "gdp/guidance.hpp"
#include "gdp/schedule.hpp"

namespace gdp {

struct SamplingMode {
  enum class Kind { Ddpm, Ddim };
  Kind kind = Kind::Ddpm;
  int ddim_steps = 20;
  double eta = 0.0;

  static SamplingMode ddpm() { return {}; }
  static SamplingMode ddim(int steps, double eta) { return {Kind::Ddim, steps, eta}; }
};

struct PatchConfig {
  int size = 0;
  int stride = 0;
};

struct TraceRecord {
  int step = 0;
  int t = 0;
  double loss_total = 0.0;
  double loss_fidelity = 0.0;
  std::vector<double> factors;  // one per AffineLight observation
  double mean_abs_offset = 0.0;
};

struct SamplerRun {
  std::shared_ptr<const EpsilonModel> model;
  std::vector<Observation> observations;
  GuidanceConfig cfg;
  NoiseSchedule sched = make_linear_schedule();
  std::uint64_t seed = 0;
  SamplingMode mode;
  std::optional<PatchConfig> patch;
  /// Output size; defaults to the model's native shape.
  std::optional<Shape> image_shape;
  bool record_trace = false;
};

struct SampleResult {
  ImageTensor x0;
  std::vector<TraceRecord> trace;
  /// Observations after sampling, including optimized blind parameters.
  std::vector<Observation> observations;
};

/// Ancestral (DDPM) reverse process at the model's native size.
SampleResult sample(const SamplerRun& run);

/// DDIM reverse process over a uniform skip grid; guidance acts on the clean
/// estimate before each jump.
SampleResult sample_ddim(const SamplerRun& run);

/// DDPM over an image of any size >= the patch size. Each step averages the
/// per-patch noise predictions per pixel before one global guided update.
SampleResult sample_patched(const SamplerRun& run);

/// Picks sample / sample_ddim / sample_patched from the run's mode and patch
/// settings.
SampleResult run_sampler(const SamplerRun& run);

/// Patch origins along one axis: stride steps, last origin flush with the end.
std::vector<int> patch_origins(int extent, int patch, int stride);

/// Number of patches covering each pixel (single channel plane).
std::vector<int> patch_coverage(int height, int width, const PatchConfig& patch);

/// Per-pixel mean of the model's noise prediction over all covering patches.
ImageTensor patched_eps(const EpsilonModel& model, const ImageTensor& x_t, int t,
                        const NoiseSchedule& sched, const PatchConfig& patch);

struct HierarchicalResult {
  ImageTensor x0;
  std::vector<AffineLight> params;  // full-resolution, frozen in stage 2
  std::vector<TraceRecord> stage1_trace;
  std::vector<TraceRecord> stage2_trace;
};

/// Two-stage blind restoration. Stage 1 estimates (f, M) at a reduced size
/// whose short side is `base_size`; stage 2 upsamples M, freezes both and
/// restores at full size. The run's observations must all be AffineLight;
/// their parameter values are ignored and re-initialized from the seed.
HierarchicalResult hierarchical_restore(const SamplerRun& run, int base_size = 32);

/// Tab-separated: step, t, loss_total, loss_fidelity, f_1..f_n, mean_abs_M.
void write_trace_tsv(std::ostream& os, const std::vector<TraceRecord>& trace);

}  // namespace gdp
