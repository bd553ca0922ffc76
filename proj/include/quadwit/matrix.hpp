#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace quadwit {

/// Dense square matrix, row-major. Rows index party a, columns party b.
class Matrix {
 public:
  Matrix() = default;
  explicit Matrix(int n, double fill = 0.0) : n_(n), v_(static_cast<std::size_t>(n) * n, fill) {
    if (n <= 0) throw std::invalid_argument("Matrix: size must be positive");
  }

  int size() const { return n_; }
  double& operator()(int r, int c) { return v_[static_cast<std::size_t>(r) * n_ + c]; }
  double operator()(int r, int c) const { return v_[static_cast<std::size_t>(r) * n_ + c]; }

  const std::vector<double>& data() const { return v_; }
  std::vector<double>& data() { return v_; }

  bool operator==(const Matrix& o) const { return n_ == o.n_ && v_ == o.v_; }

 private:
  int n_ = 0;
  std::vector<double> v_;
};

}  // namespace quadwit
