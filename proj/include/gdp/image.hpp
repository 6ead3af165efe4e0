#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace gdp {

/// Channel-major image dimensions.
struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }

  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// Throws std::invalid_argument if any dimension is < 1.
void require_valid(const Shape& s, const char* what);

/// Throws std::invalid_argument naming `what` if a != b.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

/// Dense C x H x W buffer of 32-bit reals, row-major within each channel.
///
/// Holds images (nominal range [0,1]) as well as latents, noise and
/// gradients (unbounded). Reductions accumulate in double.
class ImageTensor {
 public:
  ImageTensor() = default;
  explicit ImageTensor(Shape shape, float fill = 0.0f);
  ImageTensor(Shape shape, std::vector<float> data);

  static ImageTensor zeros(Shape shape) { return ImageTensor(shape, 0.0f); }
  static ImageTensor constant(Shape shape, float v) { return ImageTensor(shape, v); }

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  const std::vector<float>& values() const { return data_; }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(int c, int y, int x) {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }
  float at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }

  ImageTensor& operator+=(const ImageTensor& o);
  ImageTensor& operator-=(const ImageTensor& o);
  ImageTensor& operator*=(float s);

  /// this += a * o
  ImageTensor& axpy(float a, const ImageTensor& o);

  bool all_finite() const;

 private:
  Shape shape_{};
  std::vector<float> data_;
};

ImageTensor operator+(ImageTensor a, const ImageTensor& b);
ImageTensor operator-(ImageTensor a, const ImageTensor& b);
ImageTensor operator*(float s, ImageTensor a);

/// Elementwise a*x + b*y.
ImageTensor lincomb(double a, const ImageTensor& x, double b, const ImageTensor& y);

double dot(const ImageTensor& a, const ImageTensor& b);
double sum(const ImageTensor& a);
double mean(const ImageTensor& a);
double mean_abs(const ImageTensor& a);
double sum_squares(const ImageTensor& a);
double mse(const ImageTensor& a, const ImageTensor& b);

ImageTensor clamp01(const ImageTensor& a);

/// Crop a patch [y0, y0+h) x [x0, x0+w) across all channels.
ImageTensor crop(const ImageTensor& img, int y0, int x0, int h, int w);

/// Pixel centers sit at (i + 0.5) / N on both grids.
ImageTensor resize_nearest(const ImageTensor& img, int new_h, int new_w);
ImageTensor resize_bilinear(const ImageTensor& img, int new_h, int new_w);

}  // namespace gdp
