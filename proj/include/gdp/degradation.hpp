#pragma once

#include <string>
#include <variant>
#include <vector>

#include "gdp/image.hpp"
#include "gdp/rng.hpp"

namespace gdp {

/// s x s block mean; s must divide H and W.
struct DownsampleAvg {
  int factor = 4;
};

/// Same-size convolution with a k x k box kernel (1/k^2), zero padding.
struct BlurUniform {
  int kernel = 9;
};

/// Channel mean, 3 -> 1 channels.
struct Grayscale {};

/// Elementwise product with a binary mask of the operand's shape.
struct Mask {
  ImageTensor mask;
};

/// y = f x + M with scalar light factor f and per-pixel light mask M.
struct AffineLight {
  double factor = 1.0;
  ImageTensor offset;
};

class DegradationModel;

/// Left-to-right application of the stages.
struct Compose {
  std::vector<DegradationModel> stages;
};

class DegradationModel {
 public:
  using Variant = std::variant<DownsampleAvg, BlurUniform, Grayscale, Mask, AffineLight, Compose>;

  DegradationModel() : op_(Compose{}) {}
  DegradationModel(DownsampleAvg d) : op_(d) {}
  DegradationModel(BlurUniform d) : op_(d) {}
  DegradationModel(Grayscale d) : op_(d) {}
  DegradationModel(Mask d) : op_(std::move(d)) {}
  DegradationModel(AffineLight d) : op_(std::move(d)) {}
  DegradationModel(Compose d) : op_(std::move(d)) {}

  const Variant& op() const { return op_; }
  Variant& op() { return op_; }

  /// Null when this is not a bare AffineLight.
  AffineLight* affine_light() { return std::get_if<AffineLight>(&op_); }
  const AffineLight* affine_light() const { return std::get_if<AffineLight>(&op_); }

  std::string describe() const;

 private:
  Variant op_;
};

/// Codomain shape for an operand of shape `in`; throws on invalid pairs.
Shape output_shape(const DegradationModel& d, const Shape& in);

ImageTensor apply(const DegradationModel& d, const ImageTensor& x);

/// Adjoint of the linear part of `d`. `v` lives in the codomain; the result
/// has shape `domain`.
ImageTensor adjoint(const DegradationModel& d, const ImageTensor& v, const Shape& domain);

struct FidelityGradient {
  double loss;
  ImageTensor grad;
};

/// loss = mean((D x - y)^2), grad = (2 / N) J^T (D x - y), N = |y|.
FidelityGradient grad_fidelity(const DegradationModel& d, const ImageTensor& x,
                               const ImageTensor& y);

struct AffineParamGradient {
  double loss;
  double d_factor;
  ImageTensor d_offset;
};

/// Gradients of mean((f x + M - y)^2) with respect to f and M.
AffineParamGradient grad_affine_params(double factor, const ImageTensor& offset,
                                       const ImageTensor& x, const ImageTensor& y);

/// Binary mask with exactly floor(fraction * H * W) pixel positions zeroed
/// across all channels.
ImageTensor make_random_mask(SeededRng& rng, Shape shape, double drop_fraction);

/// Parses a stage list such as "blur:9,down:4", "gray", "mask" (mask image
/// supplied separately) or "light:0.3:0.05". Stages are applied in order.
DegradationModel parse_degradation(const std::string& spec, const Shape& domain,
                                   const ImageTensor* mask = nullptr);

}  // namespace gdp
