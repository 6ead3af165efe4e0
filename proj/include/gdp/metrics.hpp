#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "gdp/degradation.hpp"
#include "gdp/image.hpp"

namespace gdp {

/// 10 log10(1 / MSE) for signals in [0, 1]; +infinity when the images are
/// identical.
double psnr(const ImageTensor& a, const ImageTensor& b);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, L = 1, averaged over channels and valid window positions.
double ssim(const ImageTensor& a, const ImageTensor& b);

/// MSE between the restored image pushed through `d` and the observation.
double consistency(const DegradationModel& d, const ImageTensor& x_hat, const ImageTensor& y);

/// Lightness order error. Lightness is the per-pixel channel maximum.
/// grid == 0 evaluates all m^2 ordered pairs and divides by m. grid > 0
/// restricts both pair members to an evenly spaced grid x grid subset of g
/// pixels and rescales by m / g^2 so the result estimates the full value.
double loe(const ImageTensor& enhanced, const ImageTensor& reference, int grid = 50);

struct MetricsReport {
  double psnr = 0.0;
  double ssim = 0.0;
  std::optional<double> consistency;
  std::optional<double> loe;
};

/// Infinite PSNR prints as "inf". Report writers scale consistency by 1e4.
std::string format_psnr(double v);
void write_metrics_tsv_header(std::ostream& os);
void write_metrics_tsv_row(std::ostream& os, const std::string& name, const MetricsReport& r);
std::string metrics_json(const std::string& name, const MetricsReport& r);

}  // namespace gdp
