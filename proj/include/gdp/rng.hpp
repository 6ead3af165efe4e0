#pragma once

#include <cstdint>

#include "gdp/image.hpp"

namespace gdp {

/// Counter-based, splittable random source.
///
/// Every draw is a pure function of (key, counter), so a stream can be
/// forked by key (`split`) and individual values can be addressed by index
/// (`normal_at`). Two generators built from the same seed and driven through
/// the same call sequence produce identical output.
class SeededRng {
 public:
  using result_type = std::uint64_t;

  explicit SeededRng(std::uint64_t seed = 0);

  /// Independent child stream keyed by `stream`. Does not advance this one.
  SeededRng split(std::uint64_t stream) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  double normal();

  /// Standard normal addressed by index; does not advance the stream.
  double normal_at(std::uint64_t index) const;

  std::uint64_t key() const { return key_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }
  result_type operator()() { return next_u64(); }

 private:
  SeededRng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// i.i.d. standard-normal image. Consumes one draw from `rng` to key the
/// buffer; entry i is then a function of that key and i only.
ImageTensor gaussian_image(SeededRng& rng, Shape shape);

}  // namespace gdp
