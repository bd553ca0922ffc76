#pragma once

#include <array>
#include <cmath>

namespace quadwit {

inline constexpr int kGaussOrder = 20;

/// Gauss-Legendre nodes/weights on [-1, 1], computed once by Newton iteration
/// on the Legendre polynomial (converges to machine precision in a few steps).
struct GaussRule {
  std::array<double, kGaussOrder> node{};
  std::array<double, kGaussOrder> weight{};

  GaussRule() {
    const int n = kGaussOrder;
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
        }
        pp = n * (x * p0 - p1) / (x * x - 1.0);
        const double dx = p0 / pp;
        x -= dx;
        if (std::abs(dx) < 1e-15) break;
      }
      node[i] = -x;
      node[n - 1 - i] = x;
      weight[i] = 2.0 / ((1.0 - x * x) * pp * pp);
      weight[n - 1 - i] = weight[i];
    }
  }
};

inline const GaussRule& gauss_rule() {
  static const GaussRule rule;
  return rule;
}

/// Integrates f over [a, b] with a fixed-order Gauss-Legendre rule.
template <typename F>
double gauss_integrate(F&& f, double a, double b) {
  const GaussRule& g = gauss_rule();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < kGaussOrder; ++i) sum += g.weight[i] * f(mid + half * g.node[i]);
  return sum * half;
}

/// Mass of a centered normal with std `sigma` on [lo, hi]. Uses erfc on
/// one-sided intervals to keep relative precision in the tails.
inline double gaussian_interval_mass(double lo, double hi, double sigma) {
  if (!(hi > lo)) return 0.0;
  const double s = sigma * M_SQRT2;
  if (lo >= 0.0) return 0.5 * (std::erfc(lo / s) - std::erfc(hi / s));
  if (hi <= 0.0) return 0.5 * (std::erfc(-hi / s) - std::erfc(-lo / s));
  return 0.5 * (std::erf(hi / s) + std::erf(-lo / s));
}

/// Standard normal CDF.
inline double normal_cdf(double x, double sigma) {
  return 0.5 * std::erfc(-x / (sigma * M_SQRT2));
}

}  // namespace quadwit
