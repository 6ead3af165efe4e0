#include "gdp/metrics.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace gdp {

double psnr(const ImageTensor& a, const ImageTensor& b) {
  const double e = mse(a, b);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / e);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_taps() {
  std::vector<double> w(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Valid-region separable filtering of one plane.
std::vector<double> filter_valid(const std::vector<double>& in, int h, int w,
                                 const std::vector<double>& taps) {
  const int oh = h - kWindow + 1;
  const int ow = w - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[k] * in[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  const int h = a.height();
  const int w = a.width();
  if (h < kWindow || w < kWindow) throw std::invalid_argument("ssim: image smaller than 11x11");
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const auto taps = gaussian_taps();
  const std::size_t plane = a.shape().plane();
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> pa(plane), pb(plane), paa(plane), pbb(plane), pab(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      pa[i] = a[c * plane + i];
      pb[i] = b[c * plane + i];
      paa[i] = pa[i] * pa[i];
      pbb[i] = pb[i] * pb[i];
      pab[i] = pa[i] * pb[i];
    }
    const auto ma = filter_valid(pa, h, w, taps);
    const auto mb = filter_valid(pb, h, w, taps);
    const auto saa = filter_valid(paa, h, w, taps);
    const auto sbb = filter_valid(pbb, h, w, taps);
    const auto sab = filter_valid(pab, h, w, taps);
    for (std::size_t i = 0; i < ma.size(); ++i) {
      const double va = saa[i] - ma[i] * ma[i];
      const double vb = sbb[i] - mb[i] * mb[i];
      const double cov = sab[i] - ma[i] * mb[i];
      total += ((2.0 * ma[i] * mb[i] + c1) * (2.0 * cov + c2)) /
               ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
    }
    count += ma.size();
  }
  return total / static_cast<double>(count);
}

double consistency(const DegradationModel& d, const ImageTensor& x_hat, const ImageTensor& y) {
  const ImageTensor dx = apply(d, x_hat);
  return mse(dx, y);
}

namespace {

std::vector<float> lightness(const ImageTensor& img) {
  std::vector<float> out(img.shape().plane());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      float m = img.at(0, y, x);
      for (int c = 1; c < img.channels(); ++c) m = std::max(m, img.at(c, y, x));
      out[static_cast<std::size_t>(y) * img.width() + x] = m;
    }
  }
  return out;
}

std::vector<std::size_t> grid_positions(int h, int w, int grid) {
  const int ny = std::min(grid, h);
  const int nx = std::min(grid, w);
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(ny) * nx);
  for (int i = 0; i < ny; ++i) {
    const int y = static_cast<int>((i + 0.5) * h / ny);
    for (int j = 0; j < nx; ++j) {
      const int x = static_cast<int>((j + 0.5) * w / nx);
      out.push_back(static_cast<std::size_t>(y) * w + x);
    }
  }
  return out;
}

}  // namespace

double loe(const ImageTensor& enhanced, const ImageTensor& reference, int grid) {
  if (enhanced.height() != reference.height() || enhanced.width() != reference.width()) {
    throw std::invalid_argument("loe: image sizes differ");
  }
  if (grid < 0) throw std::invalid_argument("loe: grid must be >= 0");
  const auto te = lightness(enhanced);
  const auto tr = lightness(reference);
  const double m = static_cast<double>(te.size());
  std::vector<std::size_t> pos;
  if (grid == 0) {
    pos.resize(te.size());
    for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  } else {
    pos = grid_positions(enhanced.height(), enhanced.width(), grid);
  }
  std::uint64_t disagree = 0;
  for (std::size_t i : pos) {
    for (std::size_t j : pos) {
      const bool ue = te[i] >= te[j];
      const bool ur = tr[i] >= tr[j];
      disagree += (ue != ur) ? 1 : 0;
    }
  }
  const double g = static_cast<double>(pos.size());
  if (grid == 0) return static_cast<double>(disagree) / m;
  return static_cast<double>(disagree) * m / (g * g);
}

namespace {

// Reports quote consistency in units of 1e-4.
constexpr double kConsistencyScale = 1e4;

}  // namespace

std::string format_psnr(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream os;
  os << v;
  return os.str();
}

void write_metrics_tsv_header(std::ostream& os) {
  os << "name\tpsnr\tssim\tconsistency_x1e4\tloe\n";
}

void write_metrics_tsv_row(std::ostream& os, const std::string& name, const MetricsReport& r) {
  os << name << '\t' << format_psnr(r.psnr) << '\t' << r.ssim << '\t';
  if (r.consistency) os << *r.consistency * kConsistencyScale; else os << "NA";
  os << '\t';
  if (r.loe) os << *r.loe; else os << "NA";
  os << '\n';
}

std::string metrics_json(const std::string& name, const MetricsReport& r) {
  nlohmann::json j;
  j["name"] = name;
  if (std::isinf(r.psnr)) j["psnr"] = "inf"; else j["psnr"] = r.psnr;
  j["ssim"] = r.ssim;
  j["consistency_x1e4"] = r.consistency ? nlohmann::json(*r.consistency * kConsistencyScale) : nlohmann::json(nullptr);
  j["loe"] = r.loe ? nlohmann::json(*r.loe) : nlohmann::json(nullptr);
  return j.dump();
}

}  // namespace gdp
