#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "quadwit/grid.hpp"
#include "quadwit/matrix.hpp"

namespace quadwit {

/// Kahan-compensated accumulator. Entropy differences near zero drive the
/// final ebit value, so plain summation over up to 512^2 terms is not enough.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

inline double plogp(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

/// Shannon entropy in bits of a probability vector (0 log 0 := 0).
inline double shannon_entropy(const std::vector<double>& p) {
  KahanSum s;
  for (double v : p) s.add(plogp(v));
  return -s.value();
}

/// Joint entropy H(A,B) in bits of a normalized matrix.
inline double joint_entropy(const Matrix& m) {
  KahanSum s;
  for (double v : m.data()) s.add(plogp(v));
  return -s.value();
}

/// Marginal over rows for each column: P(b).
inline std::vector<double> marginal_b(const Matrix& m) {
  const int n = m.size();
  std::vector<double> q(n, 0.0);
  for (int c = 0; c < n; ++c) {
    KahanSum s;
    for (int r = 0; r < n; ++r) s.add(m(r, c));
    q[c] = s.value();
  }
  return q;
}

/// Marginal over columns for each row: P(a).
inline std::vector<double> marginal_a(const Matrix& m) {
  const int n = m.size();
  std::vector<double> q(n, 0.0);
  for (int r = 0; r < n; ++r) {
    KahanSum s;
    for (int c = 0; c < n; ++c) s.add(m(r, c));
    q[r] = s.value();
  }
  return q;
}

/// Conditional Shannon entropy H(A|B) = H(A,B) - H(B) in bits, where B is
/// the second index (party b marginal).
inline double conditional_entropy(const Matrix& m) {
  return joint_entropy(m) - shannon_entropy(marginal_b(m));
}

/// Mutual information H(A) + H(B) - H(A,B) in bits.
inline double mutual_information(const Matrix& m) {
  return shannon_entropy(marginal_a(m)) + shannon_entropy(marginal_b(m)) - joint_entropy(m);
}

/// Replaces each block of a tiling partition by its mean value. The result
/// has the same shape and total mass; conditional entropy cannot decrease.
inline Matrix coarse_grain(const Matrix& m, const std::vector<Rect>& blocks) {
  const int n = m.size();
  long covered = 0;
  std::vector<char> seen(static_cast<std::size_t>(n) * n, 0);
  Matrix out(n);
  for (const Rect& b : blocks) {
    if (!b.within(n)) throw std::domain_error("coarse_grain: block outside matrix");
    KahanSum s;
    for (int r = b.row; r < b.row_end(); ++r)
      for (int c = b.col; c < b.col_end(); ++c) {
        std::size_t idx = static_cast<std::size_t>(r) * n + c;
        if (seen[idx]) throw std::domain_error("coarse_grain: overlapping blocks");
        seen[idx] = 1;
        s.add(m(r, c));
      }
    covered += b.area();
    const double mean = b.area() > 0 ? s.value() / static_cast<double>(b.area()) : 0.0;
    for (int r = b.row; r < b.row_end(); ++r)
      for (int c = b.col; c < b.col_end(); ++c) out(r, c) = mean;
  }
  if (covered != static_cast<long>(n) * n)
    throw std::domain_error("coarse_grain: blocks do not tile the matrix");
  return out;
}

/// Small 4-index joint distribution P(x_a, y_a, x_b, y_b) for checking the
/// component-splitting inequality on exhaustively summable sizes.
class Tensor4 {
 public:
  Tensor4(int nxa, int nya, int nxb, int nyb)
      : nxa_(nxa), nya_(nya), nxb_(nxb), nyb_(nyb),
        v_(static_cast<std::size_t>(nxa) * nya * nxb * nyb, 0.0) {
    if (nxa < 1 || nya < 1 || nxb < 1 || nyb < 1 || nxa > 8 || nya > 8 || nxb > 8 || nyb > 8)
      throw std::invalid_argument("Tensor4: each axis must be within [1, 8]");
  }

  double& at(int xa, int ya, int xb, int yb) {
    return v_[((static_cast<std::size_t>(xa) * nya_ + ya) * nxb_ + xb) * nyb_ + yb];
  }
  double at(int xa, int ya, int xb, int yb) const {
    return v_[((static_cast<std::size_t>(xa) * nya_ + ya) * nxb_ + xb) * nyb_ + yb];
  }
  int nxa() const { return nxa_; }
  int nya() const { return nya_; }
  int nxb() const { return nxb_; }
  int nyb() const { return nyb_; }
  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }

 private:
  int nxa_, nya_, nxb_, nyb_;
  std::vector<double> v_;
};

/// Returns (lhs, rhs) of the component-splitting inequality
///   H(X_a, Y_a | X_b, Y_b) <= H(X_a|X_b) + H(Y_a|Y_b),
/// with equality when the joint factorizes across components.
inline std::pair<double, double> component_split_check(const Tensor4& p) {
  const int nxa = p.nxa(), nya = p.nya(), nxb = p.nxb(), nyb = p.nyb();

  KahanSum h_full;
  for (double v : p.data()) h_full.add(plogp(v));

  std::vector<double> pb(static_cast<std::size_t>(nxb) * nyb, 0.0);
  std::vector<double> pxx(static_cast<std::size_t>(nxa) * nxb, 0.0);
  std::vector<double> pyy(static_cast<std::size_t>(nya) * nyb, 0.0);
  std::vector<double> pxb(nxb, 0.0), pyb(nyb, 0.0);
  for (int xa = 0; xa < nxa; ++xa)
    for (int ya = 0; ya < nya; ++ya)
      for (int xb = 0; xb < nxb; ++xb)
        for (int yb = 0; yb < nyb; ++yb) {
          const double v = p.at(xa, ya, xb, yb);
          pb[static_cast<std::size_t>(xb) * nyb + yb] += v;
          pxx[static_cast<std::size_t>(xa) * nxb + xb] += v;
          pyy[static_cast<std::size_t>(ya) * nyb + yb] += v;
        }
  for (int xb = 0; xb < nxb; ++xb)
    for (int yb = 0; yb < nyb; ++yb) {
      pxb[xb] += pb[static_cast<std::size_t>(xb) * nyb + yb];
      pyb[yb] += pb[static_cast<std::size_t>(xb) * nyb + yb];
    }

  const double lhs = (-h_full.value()) - shannon_entropy(pb);
  const double rhs = (shannon_entropy(pxx) - shannon_entropy(pxb)) +
                     (shannon_entropy(pyy) - shannon_entropy(pyb));
  return {lhs, rhs};
}

}  // namespace quadwit
