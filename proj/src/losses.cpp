#include "gdp/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace gdp {

namespace {
constexpr int kRegion = 8;
}

LossValue mse_loss(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a.shape(), b.shape(), "mse_loss");
  const double n = static_cast<double>(a.size());
  ImageTensor grad(a.shape());
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
    grad[i] = static_cast<float>(2.0 * d / n);
  }
  return {acc / n, std::move(grad)};
}

LossValue exposure_loss(const ImageTensor& x, double target) {
  const int ry = x.height() / kRegion;
  const int rx = x.width() / kRegion;
  if (ry < 1 || rx < 1) throw std::invalid_argument("exposure_loss: image smaller than one 8x8 region");
  const double regions = static_cast<double>(ry) * rx;
  const double per_region = static_cast<double>(kRegion) * kRegion * x.channels();
  ImageTensor grad(x.shape());
  double loss = 0.0;
  for (int by = 0; by < ry; ++by) {
    for (int bx = 0; bx < rx; ++bx) {
      double acc = 0.0;
      for (int c = 0; c < x.channels(); ++c) {
        for (int y = 0; y < kRegion; ++y) {
          for (int xx = 0; xx < kRegion; ++xx) acc += x.at(c, by * kRegion + y, bx * kRegion + xx);
        }
      }
      const double diff = acc / per_region - target;
      loss += std::abs(diff);
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      const auto g = static_cast<float>(sign / (regions * per_region));
      for (int c = 0; c < x.channels(); ++c) {
        for (int y = 0; y < kRegion; ++y) {
          for (int xx = 0; xx < kRegion; ++xx) grad.at(c, by * kRegion + y, bx * kRegion + xx) = g;
        }
      }
    }
  }
  return {loss / regions, std::move(grad)};
}

LossValue color_constancy_loss(const ImageTensor& x) {
  if (x.channels() != 3) throw std::invalid_argument("color_constancy_loss: requires 3 channels");
  const double n = static_cast<double>(x.shape().plane());
  double m[3] = {0.0, 0.0, 0.0};
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < x.height(); ++y) {
      for (int xx = 0; xx < x.width(); ++xx) m[c] += x.at(c, y, xx);
    }
    m[c] /= n;
  }
  const double rg = m[0] - m[1];
  const double rb = m[0] - m[2];
  const double gb = m[1] - m[2];
  const double dm[3] = {2.0 * (rg + rb), 2.0 * (-rg + gb), 2.0 * (-rb - gb)};
  ImageTensor grad(x.shape());
  for (int c = 0; c < 3; ++c) {
    const auto g = static_cast<float>(dm[c] / n);
    for (int y = 0; y < x.height(); ++y) {
      for (int xx = 0; xx < x.width(); ++xx) grad.at(c, y, xx) = g;
    }
  }
  return {rg * rg + rb * rb + gb * gb, std::move(grad)};
}

LossValue illumination_smoothness_loss(const ImageTensor& m) {
  if (m.height() < 2 && m.width() < 2) {
    throw std::invalid_argument("illumination_smoothness_loss: needs at least two pixels");
  }
  std::vector<double> g(m.size(), 0.0);
  double loss = 0.0;
  const int h = m.height();
  const int w = m.width();
  auto idx = [&](int c, int y, int x) { return (static_cast<std::size_t>(c) * h + y) * w + x; };
  for (int c = 0; c < m.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (x + 1 < w) {
          const double d = static_cast<double>(m.at(c, y, x + 1)) - m.at(c, y, x);
          loss += d * d;
          g[idx(c, y, x + 1)] += 2.0 * d;
          g[idx(c, y, x)] -= 2.0 * d;
        }
        if (y + 1 < h) {
          const double d = static_cast<double>(m.at(c, y + 1, x)) - m.at(c, y, x);
          loss += d * d;
          g[idx(c, y + 1, x)] += 2.0 * d;
          g[idx(c, y, x)] -= 2.0 * d;
        }
      }
    }
  }
  ImageTensor grad(m.shape());
  for (std::size_t i = 0; i < g.size(); ++i) grad[i] = static_cast<float>(g[i]);
  return {loss, std::move(grad)};
}

GuidanceLoss total_guidance_loss(std::span<const Observation> observations, const ImageTensor& x,
                                 const LossWeights& w) {
  GuidanceLoss out{0.0, 0.0, ImageTensor(x.shape())};
  for (const auto& obs : observations) {
    auto fid = grad_fidelity(obs.degradation, x, obs.y);
    out.fidelity += fid.loss;
    if (w.mse != 0.0) out.grad.axpy(static_cast<float>(w.mse), fid.grad);
  }
  out.total = w.mse * out.fidelity;
  if (w.exposure != 0.0) {
    auto e = exposure_loss(x, w.exposure_target);
    out.total += w.exposure * e.value;
    out.grad.axpy(static_cast<float>(w.exposure), e.grad);
  }
  if (w.color != 0.0) {
    auto c = color_constancy_loss(x);
    out.total += w.color * c.value;
    out.grad.axpy(static_cast<float>(w.color), c.grad);
  }
  return out;
}

GuidanceLoss total_guidance_loss(const DegradationModel& d, const ImageTensor& x,
                                 const ImageTensor& y, const LossWeights& w) {
  const Observation obs{d, y};
  return total_guidance_loss(std::span<const Observation>(&obs, 1), x, w);
}

}  // namespace gdp
