#include "gdp/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gdp {

namespace {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t hash2(std::uint64_t key, std::uint64_t counter) {
  return mix64(key ^ mix64(counter * kGolden + 0x632be59bd9b4e019ULL));
}

double to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

double box_muller(std::uint64_t a, std::uint64_t b) {
  // (0, 1] keeps the log finite.
  const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = to_unit(b);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed) : key_(mix64(seed + kGolden)), counter_(0) {}

SeededRng SeededRng::split(std::uint64_t stream) const {
  return SeededRng(hash2(key_ ^ 0xd1b54a32d192ed03ULL, stream), 0);
}

std::uint64_t SeededRng::next_u64() { return hash2(key_, counter_++); }

double SeededRng::uniform() { return to_unit(next_u64()); }

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t SeededRng::below(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("SeededRng::below: bound must be positive");
  const std::uint64_t limit = max() - max() % bound;
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

double SeededRng::normal() {
  const std::uint64_t a = next_u64();
  const std::uint64_t b = next_u64();
  return box_muller(a, b);
}

double SeededRng::normal_at(std::uint64_t index) const {
  return box_muller(hash2(key_, 2 * index), hash2(key_, 2 * index + 1));
}

ImageTensor gaussian_image(SeededRng& rng, Shape shape) {
  require_valid(shape, "gaussian_image");
  const SeededRng keyed = rng.split(rng.next_u64());
  ImageTensor out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(keyed.normal_at(i));
  }
  return out;
}

}  // namespace gdp
