#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "gaga/errors.hpp"

namespace gaga {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}
}  // namespace detail

// Counter-based stream (splitmix64): output i is a pure function of
// (key, i), so substreams keyed off gene/replicate indices are independent
// and reproducible no matter how work is scheduled.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(detail::mix64(seed ^ 0x5851F42D4C957F2DULL)) {}

  Rng substream(std::uint64_t stream) const {
    Rng r(0);
    r.key_ = detail::mix64(key_ ^ detail::mix64(stream + 0x9E3779B97F4A7C15ULL));
    r.counter_ = 0;
    return r;
  }

  std::uint64_t next_u64() {
    return detail::mix64(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL);
  }

  // uniform on (0, 1), never exactly 0 or 1
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  double normal() {
    // Marsaglia polar, second variate discarded
    for (;;) {
      const double u = 2.0 * uniform() - 1.0;
      const double v = 2.0 * uniform() - 1.0;
      const double s = u * u + v * v;
      if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  // Ga(shape, rate), mean shape/rate; Marsaglia-Tsang with the shape<1 boost
  double gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0))
      throw numeric_error(errc::domain_error, "gamma sampler requires positive shape and rate");
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0, rate);
      return g * std::pow(uniform(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      const double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v / rate;
    }
  }

  // IGa(g, h) with density proportional to x^(-g-1) exp(-h/x)
  double inverse_gamma(double shape, double h) { return 1.0 / gamma(shape, h); }

  std::size_t categorical(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    const double u = uniform() * total;
    double cum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      cum += probs[i];
      if (u <= cum) return i;
    }
    return probs.size() - 1;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace gaga
