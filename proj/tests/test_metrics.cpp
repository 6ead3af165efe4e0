#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "gdp/metrics.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace gdp;
using testutil::uniform_image;

namespace {

// Direct double-loop SSIM with a non-separable 2-D Gaussian window.
double naive_ssim(const ImageTensor& a, const ImageTensor& b) {
  double w[11][11];
  double tot = 0.0;
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
      tot += w[i][j];
    }
  }
  const double c1 = 1e-4, c2 = 9e-4;
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < a.channels(); ++c) {
    for (int y = 0; y + 11 <= a.height(); ++y) {
      for (int x = 0; x + 11 <= a.width(); ++x) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int i = 0; i < 11; ++i) {
          for (int j = 0; j < 11; ++j) {
            const double k = w[i][j] / tot;
            const double va = a.at(c, y + i, x + j), vb = b.at(c, y + i, x + j);
            ma += k * va;
            mb += k * vb;
            saa += k * va * va;
            sbb += k * vb * vb;
            sab += k * va * vb;
          }
        }
        const double cov = sab - ma * mb;
        sum += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (saa - ma * ma + sbb - mb * mb + c2));
        ++n;
      }
    }
  }
  return sum / n;
}

std::vector<double> lightness(const ImageTensor& img) {
  std::vector<double> out;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double m = img.at(0, y, x);
      for (int c = 1; c < img.channels(); ++c) m = std::max(m, double(img.at(c, y, x)));
      out.push_back(m);
    }
  }
  return out;
}

double brute_loe(const ImageTensor& e, const ImageTensor& r) {
  const auto te = lightness(e), tr = lightness(r);
  double count = 0.0;
  for (std::size_t i = 0; i < te.size(); ++i) {
    for (std::size_t j = 0; j < te.size(); ++j) count += ((te[i] >= te[j]) != (tr[i] >= tr[j]));
  }
  return count / te.size();
}

}  // namespace

TEST_CASE("psnr") {
  SeededRng rng(1);
  const ImageTensor a = uniform_image(rng, Shape{3, 8, 8});
  CHECK(std::isinf(psnr(a, a)));
  CHECK(format_psnr(psnr(a, a)) == "inf");
  const ImageTensor b = a + ImageTensor(a.shape(), 0.1f);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));
  CHECK(psnr(ImageTensor(Shape{1, 2, 2}), ImageTensor(Shape{1, 2, 2}, 1.0f)) == doctest::Approx(0.0));
  const ImageTensor c = uniform_image(rng, a.shape());
  CHECK(psnr(a, c) == psnr(c, a));
  CHECK_THROWS(psnr(a, ImageTensor(Shape{1, 8, 8})));
}

TEST_CASE("ssim against the direct-summation oracle") {
  SeededRng rng(2);
  for (int trial = 0; trial < 3; ++trial) {
    const ImageTensor a = uniform_image(rng, Shape{3, 16, 19});
    ImageTensor b = a;
    b.axpy(0.2f, gaussian_image(rng, a.shape()));
    CHECK(std::abs(ssim(a, b) - naive_ssim(a, b)) <= 1e-6);
  }
  const ImageTensor a = uniform_image(rng, Shape{1, 12, 12});
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  const ImageTensor inv = ImageTensor(a.shape(), 1.0f) - a;
  CHECK(ssim(a, inv) < 1.0);
  CHECK_THROWS(ssim(ImageTensor(Shape{1, 10, 20}), ImageTensor(Shape{1, 10, 20})));
}

TEST_CASE("consistency") {
  SeededRng rng(3);
  const Shape s{3, 8, 8};
  const ImageTensor x = uniform_image(rng, s);
  const DegradationModel d = DownsampleAvg{2};
  CHECK(consistency(d, x, apply(d, x)) == 0.0);
  const ImageTensor y = uniform_image(rng, s);
  CHECK(consistency(BlurUniform{1}, x, y) == doctest::Approx(mse(x, y)));
  const ImageTensor m = make_random_mask(rng, s, 0.5);
  ImageTensor x2 = x;
  for (std::size_t i = 0; i < x2.size(); ++i) {
    if (m[i] == 0.0f) x2[i] = 0.123f;
  }
  CHECK(consistency(Mask{m}, x, y) == consistency(Mask{m}, x2, y));
}

TEST_CASE("loe: hand case, identity, brute force, monotone remaps") {
  const ImageTensor e(Shape{1, 1, 2}, std::vector<float>{0.2f, 0.8f});
  const ImageTensor r(Shape{1, 1, 2}, std::vector<float>{0.8f, 0.2f});
  CHECK(loe(e, r, 0) == 1.0);
  SeededRng rng(4);
  const ImageTensor a = uniform_image(rng, Shape{3, 8, 8});
  CHECK(loe(a, a, 0) == 0.0);
  for (int trial = 0; trial < 5; ++trial) {
    const ImageTensor p = uniform_image(rng, Shape{3, 8, 8});
    const ImageTensor q = uniform_image(rng, Shape{1, 8, 8});
    CHECK(loe(p, q, 0) == doctest::Approx(brute_loe(p, q)));
    CHECK(loe(p, q, 0) >= 0.0);
  }
  ImageTensor gamma = a;
  for (auto& v : gamma.data()) v = std::pow(v, 2.2f);
  CHECK(loe(gamma, a, 0) == 0.0);
  CHECK(brute_loe(gamma, a) == 0.0);
  CHECK_THROWS(loe(a, ImageTensor(Shape{3, 8, 9}), 0));
}

TEST_CASE("sampled loe converges to the full value") {
  SeededRng rng(5);
  const ImageTensor a = uniform_image(rng, Shape{3, 32, 32});
  ImageTensor b = a;
  b.axpy(0.3f, gaussian_image(rng, a.shape()));
  const double full = loe(a, b, 0);
  CHECK(loe(a, b, 32) == doctest::Approx(full));
  const double coarse = std::abs(loe(a, b, 8) - full) / full;
  const double fine = std::abs(loe(a, b, 24) - full) / full;
  CHECK(fine <= 0.05);
  CHECK(fine <= coarse + 1e-12);
}

TEST_CASE("report writers") {
  MetricsReport r;
  r.psnr = std::numeric_limits<double>::infinity();
  r.ssim = 1.0;
  r.consistency = 2e-4;
  std::ostringstream os;
  write_metrics_tsv_header(os);
  write_metrics_tsv_row(os, "img", r);
  CHECK(os.str() == "name\tpsnr\tssim\tconsistency_x1e4\tloe\nimg\tinf\t1\t2\tNA\n");
  const auto j = nlohmann::json::parse(metrics_json("img", r));
  CHECK(j["psnr"] == "inf");
  CHECK(j["consistency_x1e4"].get<double>() == doctest::Approx(2.0));
  CHECK(j["loe"].is_null());
}
