#include "gdp/degradation.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gdp {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_mask_values(const ImageTensor& m) {
  for (float v : m.data()) {
    if (v != 0.0f && v != 1.0f) throw std::invalid_argument("Mask: entries must be 0 or 1");
  }
}

ImageTensor downsample(const ImageTensor& x, int s) {
  const Shape out_shape{x.channels(), x.height() / s, x.width() / s};
  ImageTensor out(out_shape);
  const double inv = 1.0 / (static_cast<double>(s) * s);
  for (int c = 0; c < out_shape.channels; ++c) {
    for (int y = 0; y < out_shape.height; ++y) {
      for (int xx = 0; xx < out_shape.width; ++xx) {
        double acc = 0.0;
        for (int dy = 0; dy < s; ++dy) {
          for (int dx = 0; dx < s; ++dx) acc += x.at(c, y * s + dy, xx * s + dx);
        }
        out.at(c, y, xx) = static_cast<float>(acc * inv);
      }
    }
  }
  return out;
}

ImageTensor downsample_adjoint(const ImageTensor& v, int s, const Shape& domain) {
  ImageTensor out(domain);
  const float inv = static_cast<float>(1.0 / (static_cast<double>(s) * s));
  for (int c = 0; c < domain.channels; ++c) {
    for (int y = 0; y < domain.height; ++y) {
      for (int x = 0; x < domain.width; ++x) out.at(c, y, x) = v.at(c, y / s, x / s) * inv;
    }
  }
  return out;
}

// Zero-padded k x k box filter, evaluated separably.
ImageTensor box_blur(const ImageTensor& x, int k) {
  const int r = k / 2;
  const int h = x.height();
  const int w = x.width();
  const double inv = 1.0 / (static_cast<double>(k) * k);
  std::vector<double> rows(static_cast<std::size_t>(h) * w);
  ImageTensor out(x.shape());
  for (int c = 0; c < x.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int dx = std::max(0, xx - r); dx <= std::min(w - 1, xx + r); ++dx) acc += x.at(c, y, dx);
        rows[static_cast<std::size_t>(y) * w + xx] = acc;
      }
    }
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        double acc = 0.0;
        for (int dy = std::max(0, y - r); dy <= std::min(h - 1, y + r); ++dy) {
          acc += rows[static_cast<std::size_t>(dy) * w + xx];
        }
        out.at(c, y, xx) = static_cast<float>(acc * inv);
      }
    }
  }
  return out;
}

ImageTensor gray(const ImageTensor& x) {
  ImageTensor out({1, x.height(), x.width()});
  for (int y = 0; y < x.height(); ++y) {
    for (int xx = 0; xx < x.width(); ++xx) {
      const double m = (static_cast<double>(x.at(0, y, xx)) + x.at(1, y, xx) + x.at(2, y, xx)) / 3.0;
      out.at(0, y, xx) = static_cast<float>(m);
    }
  }
  return out;
}

ImageTensor gray_adjoint(const ImageTensor& v, const Shape& domain) {
  ImageTensor out(domain);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < domain.height; ++y) {
      for (int x = 0; x < domain.width; ++x) {
        out.at(c, y, x) = static_cast<float>(v.at(0, y, x) / 3.0);
      }
    }
  }
  return out;
}

ImageTensor hadamard(const ImageTensor& a, const ImageTensor& b) {
  ImageTensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

}  // namespace

std::string DegradationModel::describe() const {
  return std::visit(
      overloaded{
          [](const DownsampleAvg& d) { return "down:" + std::to_string(d.factor); },
          [](const BlurUniform& d) { return "blur:" + std::to_string(d.kernel); },
          [](const Grayscale&) { return std::string("gray"); },
          [](const Mask&) { return std::string("mask"); },
          [](const AffineLight& d) {
            std::ostringstream os;
            os << "light:" << d.factor;
            return os.str();
          },
          [](const Compose& d) {
            std::string s;
            for (const auto& st : d.stages) s += (s.empty() ? "" : ",") + st.describe();
            return s.empty() ? std::string("identity") : s;
          },
      },
      op_);
}

Shape output_shape(const DegradationModel& d, const Shape& in) {
  require_valid(in, "degradation operand");
  return std::visit(
      overloaded{
          [&](const DownsampleAvg& op) {
            if (op.factor < 1) throw std::invalid_argument("DownsampleAvg: factor must be >= 1");
            if (in.height % op.factor != 0 || in.width % op.factor != 0) {
              throw std::invalid_argument("DownsampleAvg: factor " + std::to_string(op.factor) +
                                          " does not divide " + to_string(in));
            }
            return Shape{in.channels, in.height / op.factor, in.width / op.factor};
          },
          [&](const BlurUniform& op) {
            if (op.kernel < 1 || op.kernel % 2 == 0) {
              throw std::invalid_argument("BlurUniform: kernel size must be odd and positive");
            }
            return in;
          },
          [&](const Grayscale&) {
            if (in.channels != 3) throw std::invalid_argument("Grayscale: requires 3 channels");
            return Shape{1, in.height, in.width};
          },
          [&](const Mask& op) {
            require_same_shape(op.mask.shape(), in, "Mask");
            return in;
          },
          [&](const AffineLight& op) {
            require_same_shape(op.offset.shape(), in, "AffineLight");
            return in;
          },
          [&](const Compose& op) {
            Shape s = in;
            for (const auto& st : op.stages) s = output_shape(st, s);
            return s;
          },
      },
      d.op());
}

ImageTensor apply(const DegradationModel& d, const ImageTensor& x) {
  output_shape(d, x.shape());
  return std::visit(
      overloaded{
          [&](const DownsampleAvg& op) { return downsample(x, op.factor); },
          [&](const BlurUniform& op) { return box_blur(x, op.kernel); },
          [&](const Grayscale&) { return gray(x); },
          [&](const Mask& op) {
            check_mask_values(op.mask);
            return hadamard(x, op.mask);
          },
          [&](const AffineLight& op) {
            ImageTensor out(x.shape());
            for (std::size_t i = 0; i < x.size(); ++i) {
              out[i] = static_cast<float>(op.factor * x[i] + op.offset[i]);
            }
            return out;
          },
          [&](const Compose& op) {
            ImageTensor cur = x;
            for (const auto& st : op.stages) cur = apply(st, cur);
            return cur;
          },
      },
      d.op());
}

ImageTensor adjoint(const DegradationModel& d, const ImageTensor& v, const Shape& domain) {
  require_same_shape(v.shape(), output_shape(d, domain), "adjoint");
  return std::visit(
      overloaded{
          [&](const DownsampleAvg& op) { return downsample_adjoint(v, op.factor, domain); },
          [&](const BlurUniform& op) { return box_blur(v, op.kernel); },
          [&](const Grayscale&) { return gray_adjoint(v, domain); },
          [&](const Mask& op) { return hadamard(v, op.mask); },
          [&](const AffineLight& op) { return static_cast<float>(op.factor) * ImageTensor(v); },
          [&](const Compose& op) {
            std::vector<Shape> domains;
            Shape s = domain;
            for (const auto& st : op.stages) {
              domains.push_back(s);
              s = output_shape(st, s);
            }
            ImageTensor cur = v;
            for (std::size_t i = op.stages.size(); i-- > 0;) cur = adjoint(op.stages[i], cur, domains[i]);
            return cur;
          },
      },
      d.op());
}

FidelityGradient grad_fidelity(const DegradationModel& d, const ImageTensor& x,
                               const ImageTensor& y) {
  ImageTensor residual = apply(d, x);
  require_same_shape(residual.shape(), y.shape(), "grad_fidelity");
  residual -= y;
  const double n = static_cast<double>(y.size());
  const double loss = sum_squares(residual) / n;
  residual *= static_cast<float>(2.0 / n);
  return {loss, adjoint(d, residual, x.shape())};
}

AffineParamGradient grad_affine_params(double factor, const ImageTensor& offset,
                                       const ImageTensor& x, const ImageTensor& y) {
  require_same_shape(offset.shape(), x.shape(), "grad_affine_params");
  require_same_shape(y.shape(), x.shape(), "grad_affine_params");
  const double n = static_cast<double>(x.size());
  ImageTensor d_offset(x.shape());
  double loss = 0.0;
  double d_factor = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = factor * x[i] + offset[i] - y[i];
    loss += r * r;
    d_factor += x[i] * r;
    d_offset[i] = static_cast<float>(2.0 * r / n);
  }
  return {loss / n, 2.0 * d_factor / n, std::move(d_offset)};
}

ImageTensor make_random_mask(SeededRng& rng, Shape shape, double drop_fraction) {
  require_valid(shape, "make_random_mask");
  if (!(drop_fraction >= 0.0 && drop_fraction <= 1.0)) {
    throw std::invalid_argument("make_random_mask: fraction must be in [0, 1]");
  }
  const std::size_t pixels = shape.plane();
  const auto drop = static_cast<std::size_t>(std::floor(drop_fraction * static_cast<double>(pixels)));
  std::vector<std::size_t> order(pixels);
  for (std::size_t i = 0; i < pixels; ++i) order[i] = i;
  // Partial Fisher-Yates: the first `drop` slots are the deleted pixels.
  for (std::size_t i = 0; i < drop; ++i) {
    const std::size_t j = i + rng.below(pixels - i);
    std::swap(order[i], order[j]);
  }
  ImageTensor mask(shape, 1.0f);
  for (std::size_t i = 0; i < drop; ++i) {
    for (int c = 0; c < shape.channels; ++c) mask[c * pixels + order[i]] = 0.0f;
  }
  return mask;
}

DegradationModel parse_degradation(const std::string& spec, const Shape& domain,
                                   const ImageTensor* mask) {
  Compose chain;
  Shape cur = domain;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream ts(token);
    std::string p;
    while (std::getline(ts, p, ':')) parts.push_back(p);
    const std::string& kind = parts[0];
    DegradationModel stage;
    if (kind == "down") {
      stage = DownsampleAvg{parts.size() > 1 ? std::stoi(parts[1]) : 4};
    } else if (kind == "blur") {
      stage = BlurUniform{parts.size() > 1 ? std::stoi(parts[1]) : 9};
    } else if (kind == "gray") {
      stage = Grayscale{};
    } else if (kind == "mask") {
      if (mask == nullptr) throw std::invalid_argument("degradation 'mask' needs a mask image");
      stage = Mask{*mask};
    } else if (kind == "light") {
      const double f = parts.size() > 1 ? std::stod(parts[1]) : 1.0;
      const double b = parts.size() > 2 ? std::stod(parts[2]) : 0.0;
      stage = AffineLight{f, ImageTensor(cur, static_cast<float>(b))};
    } else {
      throw std::invalid_argument("unknown degradation stage '" + kind + "'");
    }
    cur = output_shape(stage, cur);
    chain.stages.push_back(std::move(stage));
  }
  if (chain.stages.size() == 1) return std::move(chain.stages.front());
  return chain;
}

}  // namespace gdp
