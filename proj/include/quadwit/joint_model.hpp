#pragma once

#include <algorithm>
#include <memory>

#include "quadwit/grid.hpp"
#include "quadwit/source_model.hpp"

namespace quadwit {

/// Rate geometry of one joint distribution as seen by the sampler: region
/// masses for coincidences and per-party marginal masses for the accidental
/// model. The Gaussian source provides the physical implementation; synthetic
/// models drive the sampler with exactly known distributions in tests.
class JointModel {
 public:
  virtual ~JointModel() = default;
  /// Fraction of total coincidences landing in the index rectangle.
  virtual double region_mass(const Rect& rect) const = 0;
  /// Party-a marginal mass of the pixel interval [i0, i1).
  virtual double marginal_mass_a(int i0, int i1) const = 0;
  /// Party-b marginal mass of the pixel interval [i0, i1).
  virtual double marginal_mass_b(int i0, int i1) const = 0;
  virtual int grid_size() const = 0;
};

class GaussianJointModel final : public JointModel {
 public:
  GaussianJointModel(const SourceModel& src, Basis basis, Component comp, const GridSpec& grid)
      : src_(src), basis_(basis), comp_(comp), grid_(grid) {}

  double region_mass(const Rect& rect) const override {
    return region_probability(src_, basis_, comp_, rect, grid_);
  }
  double marginal_mass_a(int i0, int i1) const override {
    return marginal_probability(src_, basis_, comp_, i0, i1, grid_);
  }
  double marginal_mass_b(int i0, int i1) const override { return marginal_mass_a(i0, i1); }
  int grid_size() const override { return grid_.n; }

  const GridSpec& grid() const { return grid_; }
  Basis basis() const { return basis_; }
  Component component() const { return comp_; }

 private:
  SourceModel src_;
  Basis basis_;
  Component comp_;
  GridSpec grid_;
};

/// Flat joint distribution; every pixel carries 1/n^2.
class UniformJointModel final : public JointModel {
 public:
  explicit UniformJointModel(int n) : n_(n) {}
  double region_mass(const Rect& rect) const override {
    return static_cast<double>(rect.area()) / (static_cast<double>(n_) * n_);
  }
  double marginal_mass_a(int i0, int i1) const override {
    return static_cast<double>(i1 - i0) / n_;
  }
  double marginal_mass_b(int i0, int i1) const override { return marginal_mass_a(i0, i1); }
  int grid_size() const override { return n_; }

 private:
  int n_;
};

/// Perfect single-pixel correlations: mass 1/n on each pixel of the main
/// diagonal (or anti-diagonal), uniform marginals.
class DiagonalJointModel final : public JointModel {
 public:
  DiagonalJointModel(int n, bool anti) : n_(n), anti_(anti) {}

  double region_mass(const Rect& rect) const override {
    int c0 = rect.col, c1 = rect.col_end();
    if (anti_) {
      c0 = n_ - rect.col_end();
      c1 = n_ - rect.col;
    }
    const int overlap = std::min(rect.row_end(), c1) - std::max(rect.row, c0);
    return overlap > 0 ? static_cast<double>(overlap) / n_ : 0.0;
  }
  double marginal_mass_a(int i0, int i1) const override {
    return static_cast<double>(i1 - i0) / n_;
  }
  double marginal_mass_b(int i0, int i1) const override { return marginal_mass_a(i0, i1); }
  int grid_size() const override { return n_; }

 private:
  int n_;
  bool anti_;
};

}  // namespace quadwit
