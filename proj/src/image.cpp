#include "gdp/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gdp {

std::string to_string(const Shape& s) {
  return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
         std::to_string(s.width);
}

void require_valid(const Shape& s, const char* what) {
  if (s.channels < 1 || s.height < 1 || s.width < 1) {
    throw std::invalid_argument(std::string(what) + ": degenerate shape " + to_string(s));
  }
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + to_string(a) +
                                " vs " + to_string(b));
  }
}

ImageTensor::ImageTensor(Shape shape, float fill) : shape_(shape) {
  require_valid(shape, "ImageTensor");
  data_.assign(shape.size(), fill);
}

ImageTensor::ImageTensor(Shape shape, std::vector<float> data)
    : shape_(shape), data_(std::move(data)) {
  require_valid(shape, "ImageTensor");
  if (data_.size() != shape.size()) {
    throw std::invalid_argument("ImageTensor: data length " + std::to_string(data_.size()) +
                                " does not match shape " + to_string(shape));
  }
}

ImageTensor& ImageTensor::operator+=(const ImageTensor& o) {
  require_same_shape(shape_, o.shape_, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

ImageTensor& ImageTensor::operator-=(const ImageTensor& o) {
  require_same_shape(shape_, o.shape_, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

ImageTensor& ImageTensor::operator*=(float s) {
  for (auto& v : data_) v *= s;
  return *this;
}

ImageTensor& ImageTensor::axpy(float a, const ImageTensor& o) {
  require_same_shape(shape_, o.shape_, "axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += a * o.data_[i];
  return *this;
}

bool ImageTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

ImageTensor operator+(ImageTensor a, const ImageTensor& b) { return a += b; }
ImageTensor operator-(ImageTensor a, const ImageTensor& b) { return a -= b; }
ImageTensor operator*(float s, ImageTensor a) { return a *= s; }

ImageTensor lincomb(double a, const ImageTensor& x, double b, const ImageTensor& y) {
  require_same_shape(x.shape(), y.shape(), "lincomb");
  ImageTensor out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(a * x[i] + b * y[i]);
  }
  return out;
}

double dot(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a.shape(), b.shape(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

double sum(const ImageTensor& a) {
  double acc = 0.0;
  for (float v : a.data()) acc += v;
  return acc;
}

double mean(const ImageTensor& a) { return a.empty() ? 0.0 : sum(a) / a.size(); }

double mean_abs(const ImageTensor& a) {
  if (a.empty()) return 0.0;
  double acc = 0.0;
  for (float v : a.data()) acc += std::abs(v);
  return acc / a.size();
}

double sum_squares(const ImageTensor& a) {
  double acc = 0.0;
  for (float v : a.data()) acc += static_cast<double>(v) * v;
  return acc;
}

double mse(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a.shape(), b.shape(), "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / a.size();
}

ImageTensor clamp01(const ImageTensor& a) {
  ImageTensor out = a;
  for (auto& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

ImageTensor crop(const ImageTensor& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || h < 1 || w < 1 || y0 + h > img.height() || x0 + w > img.width()) {
    throw std::invalid_argument("crop: window out of bounds");
  }
  ImageTensor out({img.channels(), h, w});
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
    }
  }
  return out;
}

ImageTensor resize_nearest(const ImageTensor& img, int new_h, int new_w) {
  require_valid(img.shape(), "resize_nearest");
  ImageTensor out({img.channels(), new_h, new_w});
  const double sy = static_cast<double>(img.height()) / new_h;
  const double sx = static_cast<double>(img.width()) / new_w;
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < new_h; ++y) {
      const int iy = std::min(static_cast<int>(std::floor((y + 0.5) * sy)), img.height() - 1);
      for (int x = 0; x < new_w; ++x) {
        const int ix = std::min(static_cast<int>(std::floor((x + 0.5) * sx)), img.width() - 1);
        out.at(c, y, x) = img.at(c, iy, ix);
      }
    }
  }
  return out;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in - 1);
    taps[i] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

ImageTensor resize_bilinear(const ImageTensor& img, int new_h, int new_w) {
  require_valid(img.shape(), "resize_bilinear");
  ImageTensor out({img.channels(), new_h, new_w});
  const auto ty = bilinear_taps(img.height(), new_h);
  const auto tx = bilinear_taps(img.width(), new_w);
  for (int c = 0; c < img.channels(); ++c) {
    for (int y = 0; y < new_h; ++y) {
      const Tap& a = ty[y];
      for (int x = 0; x < new_w; ++x) {
        const Tap& b = tx[x];
        const double top = (1.0 - b.frac) * img.at(c, a.lo, b.lo) + b.frac * img.at(c, a.lo, b.hi);
        const double bot = (1.0 - b.frac) * img.at(c, a.hi, b.lo) + b.frac * img.at(c, a.hi, b.hi);
        out.at(c, y, x) = static_cast<float>((1.0 - a.frac) * top + a.frac * bot);
      }
    }
  }
  return out;
}

}  // namespace gdp
