#pragma once

#include <cmath>
#include <cstdint>

namespace quadwit {

/// splitmix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

inline std::uint64_t derive_key(std::uint64_t h, std::uint64_t k) {
  return mix64(h + 0x9E3779B97F4A7C15ULL * (k + 1) + 0x632BE59BD9B4E019ULL);
}

/// Counter-based uniform stream. A substream is addressed by a chain of keys
/// derived from the master seed; draws inside a substream advance a local
/// counter only, so streams for distinct (tree, node, pass) triples are
/// independent of scan order and thread schedule.
class Substream {
 public:
  explicit Substream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() {
    std::uint64_t v = mix64(key_ + 0x9E3779B97F4A7C15ULL * ++counter_);
    return v;
  }

  /// Uniform in (0, 1); never returns 0 so log(u) is safe.
  double next_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

namespace detail {

/// Poisson by sequential inversion; suitable for small means.
inline std::uint64_t poisson_small(double mean, Substream& rng) {
  const double u = rng.next_double();
  double p = std::exp(-mean);
  double cum = p;
  std::uint64_t k = 0;
  while (u > cum && k < 4096) {
    ++k;
    p *= mean / static_cast<double>(k);
    cum += p;
  }
  return k;
}

/// PTRS transformed-rejection sampler (Hormann 1993) for large means.
inline std::uint64_t poisson_ptrs(double mean, Substream& rng) {
  const double slam = std::sqrt(mean);
  const double llam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double v_r = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.next_double() - 0.5;
    const double v = rng.next_double();
    const double us = 0.5 - std::abs(u);
    const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= v_r) return static_cast<std::uint64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        kf * llam - mean - std::lgamma(kf + 1.0)) {
      return static_cast<std::uint64_t>(kf);
    }
  }
}

}  // namespace detail

/// Poisson draw with the given mean from the substream.
inline std::uint64_t poisson_draw(double mean, Substream& rng) {
  if (!(mean > 0.0)) return 0;
  if (mean < 10.0) return detail::poisson_small(mean, rng);
  return detail::poisson_ptrs(mean, rng);
}

}  // namespace quadwit
