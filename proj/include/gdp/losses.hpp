#pragma once

#include <span>
#include <string>

#include "gdp/degradation.hpp"
#include "gdp/image.hpp"

namespace gdp {

struct LossValue {
  double value;
  ImageTensor grad;
};

/// Relative weights of the reconstruction and quality terms. The guidance
/// scale s is applied by the guidance step, not here.
struct LossWeights {
  double mse = 1.0;
  double exposure = 0.0;
  double color = 0.0;
  double illumination = 0.0;
  double exposure_target = 0.5;
};

/// Mean squared error over all elements.
LossValue mse_loss(const ImageTensor& a, const ImageTensor& b);

/// Mean |R_k - E| over non-overlapping 8x8 regions, where R_k averages the
/// region over all channels. Remainder rows/columns are ignored.
LossValue exposure_loss(const ImageTensor& x, double target);

/// Gray-world penalty on the three channel means.
LossValue color_constancy_loss(const ImageTensor& x);

/// Sum of squared forward differences along both axes; applied to light
/// masks only.
LossValue illumination_smoothness_loss(const ImageTensor& m);

/// One observation paired with the operator that produced it.
struct Observation {
  DegradationModel degradation;
  ImageTensor y;
};

struct GuidanceLoss {
  double total;
  double fidelity;
  ImageTensor grad;
};

/// w_mse * sum_i MSE(D_i x, y_i) + w_exp L_exp(x) + w_col L_col(x) and its
/// gradient in x. The illumination term acts on light masks and is handled
/// by the parameter optimizer.
GuidanceLoss total_guidance_loss(std::span<const Observation> observations, const ImageTensor& x,
                                 const LossWeights& w);

GuidanceLoss total_guidance_loss(const DegradationModel& d, const ImageTensor& x,
                                 const ImageTensor& y, const LossWeights& w);

}  // namespace gdp
