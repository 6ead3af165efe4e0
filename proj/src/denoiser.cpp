#include "gdp/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gdp/image_io.hpp"

namespace gdp {

namespace {

// Normalizes log-weights in place into probabilities.
void softmax_inplace(std::vector<double>& logw) {
  const double mx = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  for (double& v : logw) {
    v = std::exp(v - mx);
    z += v;
  }
  for (double& v : logw) v /= z;
}

double squared_distance_scaled(const ImageTensor& x, double scale, const ImageTensor& mu) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - scale * mu[i];
    acc += d * d;
  }
  return acc;
}

}  // namespace

GaussianMixturePrior::GaussianMixturePrior(std::vector<MixtureComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("GaussianMixturePrior: empty mixture");
  double total = 0.0;
  for (const auto& c : components_) {
    if (!(c.weight > 0.0)) throw std::invalid_argument("GaussianMixturePrior: weights must be positive");
    if (!(c.variance >= 0.0)) throw std::invalid_argument("GaussianMixturePrior: negative variance");
    require_same_shape(c.mean.shape(), components_.front().mean.shape(), "GaussianMixturePrior");
    total += c.weight;
  }
  for (auto& c : components_) c.weight /= total;
}

std::vector<double> GaussianMixturePrior::responsibilities(const ImageTensor& x_t, int t,
                                                           const NoiseSchedule& sched) const {
  require_same_shape(x_t.shape(), native_shape(), "GaussianMixturePrior");
  const double ab = sched.alpha_bar(t);
  const double noise = std::max(1.0 - ab, kMinNoiseVariance);
  const double sab = std::sqrt(ab);
  const double dim = static_cast<double>(x_t.size());
  std::vector<double> logw(components_.size());
  for (std::size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    const double v = ab * c.variance + noise;
    logw[k] = std::log(c.weight) - 0.5 * dim * std::log(v) -
              squared_distance_scaled(x_t, sab, c.mean) / (2.0 * v);
  }
  softmax_inplace(logw);
  return logw;
}

ImageTensor GaussianMixturePrior::predict_eps(const ImageTensor& x_t, int t,
                                              const NoiseSchedule& sched) const {
  if (t < 1) throw std::out_of_range("predict_eps: t must be >= 1");
  const auto gamma = responsibilities(x_t, t, sched);
  const double ab = sched.alpha_bar(t);
  const double noise = std::max(1.0 - ab, kMinNoiseVariance);
  const double sab = std::sqrt(ab);
  // eps = sqrt(1 - abar) * sum_k gamma_k (x - sqrt(abar) mu_k) / v_k
  std::vector<double> acc(x_t.size(), 0.0);
  for (std::size_t k = 0; k < components_.size(); ++k) {
    if (gamma[k] == 0.0) continue;
    const auto& c = components_[k];
    const double g = gamma[k] / (ab * c.variance + noise);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g * (x_t[i] - sab * c.mean[i]);
  }
  const double scale = std::sqrt(noise);
  ImageTensor out(x_t.shape());
  for (std::size_t i = 0; i < acc.size(); ++i) out[i] = static_cast<float>(scale * acc[i]);
  return out;
}

EmpiricalPrior::EmpiricalPrior(std::vector<ImageTensor> dataset) : dataset_(std::move(dataset)) {
  if (dataset_.empty()) throw std::invalid_argument("EmpiricalPrior: empty dataset");
  for (const auto& d : dataset_) {
    require_same_shape(d.shape(), dataset_.front().shape(), "EmpiricalPrior");
  }
}

EmpiricalPrior EmpiricalPrior::from_directory(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".png" || ext == ".gdpf") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ImageTensor> data;
  data.reserve(files.size());
  for (const auto& f : files) data.push_back(load_image(f));
  if (data.empty()) throw std::invalid_argument("EmpiricalPrior: no images in " + dir.string());
  return EmpiricalPrior(std::move(data));
}

ImageTensor EmpiricalPrior::posterior_mean(const ImageTensor& x_t, int t,
                                           const NoiseSchedule& sched) const {
  require_same_shape(x_t.shape(), native_shape(), "EmpiricalPrior");
  const double ab = sched.alpha_bar(t);
  const double noise = std::max(1.0 - ab, kMinNoiseVariance);
  const double sab = std::sqrt(ab);
  std::vector<double> logw(dataset_.size());
  for (std::size_t i = 0; i < dataset_.size(); ++i) {
    logw[i] = -squared_distance_scaled(x_t, sab, dataset_[i]) / (2.0 * noise);
  }
  softmax_inplace(logw);
  std::vector<double> acc(x_t.size(), 0.0);
  for (std::size_t i = 0; i < dataset_.size(); ++i) {
    if (logw[i] == 0.0) continue;
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += logw[i] * dataset_[i][j];
  }
  ImageTensor out(x_t.shape());
  for (std::size_t j = 0; j < acc.size(); ++j) out[j] = static_cast<float>(acc[j]);
  return out;
}

ImageTensor EmpiricalPrior::predict_eps(const ImageTensor& x_t, int t,
                                        const NoiseSchedule& sched) const {
  if (t < 1) throw std::out_of_range("predict_eps: t must be >= 1");
  const ImageTensor x0 = posterior_mean(x_t, t, sched);
  const double ab = sched.alpha_bar(t);
  const double noise = std::max(1.0 - ab, kMinNoiseVariance);
  const double sab = std::sqrt(ab);
  const double inv = 1.0 / std::sqrt(noise);
  ImageTensor out(x_t.shape());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = static_cast<float>((x_t[j] - sab * static_cast<double>(x0[j])) * inv);
  }
  return out;
}

}  // namespace gdp
