#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <filesystem>
#include <random>
#include <string>

#include "gdp/image.hpp"
#include "gdp/rng.hpp"

namespace testutil {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("gdp_test_" + std::to_string(std::random_device{}()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline gdp::ImageTensor uniform_image(gdp::SeededRng& rng, gdp::Shape s, double lo = 0.0, double hi = 1.0) {
  gdp::ImageTensor img(s);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(rng.uniform(lo, hi));
  return img;
}

struct ValueGrad {
  double value;
  gdp::ImageTensor grad;
};

/// Central difference of f along a direction whose signs follow the analytic
/// gradient (so the directional derivative is bounded away from 0), compared
/// with grad . (x+ - x-) using the perturbation actually realized in float.
inline double fd_rel_error(const std::function<ValueGrad(const gdp::ImageTensor&)>& f, const gdp::ImageTensor& x,
                           gdp::SeededRng& rng, double h = 1e-3) {
  const gdp::ImageTensor g = f(x).grad;
  gdp::ImageTensor dir(x.shape());
  for (std::size_t i = 0; i < dir.size(); ++i) {
    const double u = rng.uniform(0.5, 1.0);
    dir[i] = static_cast<float>(g[i] < 0.0f ? -u : u);
  }
  const gdp::ImageTensor xp = x + static_cast<float>(h) * dir;
  const gdp::ImageTensor xm = x - static_cast<float>(h) * dir;
  const double fd = f(xp).value - f(xm).value;
  const double an = gdp::dot(g, xp - xm);
  return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-30});
}

/// Per-coordinate central differences on a few random coordinates, in the
/// same realized-perturbation form. Skips coordinates whose derivative is 0.
inline double fd_coord_error(const std::function<ValueGrad(const gdp::ImageTensor&)>& f, const gdp::ImageTensor& x,
                             gdp::SeededRng& rng, int coords = 8, double h = 1e-2) {
  const gdp::ImageTensor g = f(x).grad;
  double worst = 0.0;
  for (int k = 0; k < coords; ++k) {
    const std::size_t i = rng.below(x.size());
    if (g[i] == 0.0f) continue;
    gdp::ImageTensor xp = x, xm = x;
    xp[i] += static_cast<float>(h);
    xm[i] -= static_cast<float>(h);
    const double fd = f(xp).value - f(xm).value;
    const double an = static_cast<double>(g[i]) * (static_cast<double>(xp[i]) - xm[i]);
    worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-30}));
  }
  return worst;
}

}  // namespace testutil
