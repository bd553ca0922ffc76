#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadwit/entropy.hpp"
#include "quadwit/quadtree.hpp"
#include "quadwit/source_model.hpp"

namespace quadwit {

/// Everything needed to rebuild one leaf's contribution to the estimate.
struct LeafEstimate {
  std::string path;
  Rect rect;
  double rate = 0.0;      // estimated count rate after efficiency division
  double pooled_c = 0.0;  // summed coincidences over all records
  double pooled_a = 0.0;  // summed accidentals
  double efficiency = 1.0;
  double total_time = 0.0;  // summed acquisition time, s
};

/// Multilevel estimate P~: a dense normalized matrix plus the leaf list that
/// generates it.
struct EstimatedDistribution {
  Basis basis = Basis::Position;
  Component component = Component::X;
  GridSpec grid;
  Matrix matrix;
  std::vector<LeafEstimate> leaves;
};

namespace detail {

/// Fill rule shared by estimation and leaf-list reconstruction so round trips
/// are bit-exact: each leaf's rate spread uniformly over its rectangle, then
/// normalized by the summed rate.
inline Matrix fill_from_leaves(const std::vector<LeafEstimate>& leaves, int n) {
  Matrix m(n);
  double total = 0.0;
  for (const LeafEstimate& leaf : leaves) total += leaf.rate;
  if (!(total > 0.0))
    throw std::runtime_error("estimate_distribution: degenerate all-zero distribution");
  for (const LeafEstimate& leaf : leaves) {
    const double cell = leaf.rate / (total * static_cast<double>(leaf.rect.area()));
    for (int r = leaf.rect.row; r < leaf.rect.row_end(); ++r)
      for (int c = leaf.rect.col; c < leaf.rect.col_end(); ++c) m(r, c) = cell;
  }
  return m;
}

}  // namespace detail

/// Rebuilds the dense matrix from a serialized leaf list.
inline Matrix rebuild_matrix(const std::vector<LeafEstimate>& leaves, int n) {
  return detail::fill_from_leaves(leaves, n);
}

/// Builds P~ from a measured tree. With `subtract` the accidentals come off
/// the pooled coincidences; negative rates clamp to zero before
/// normalization. `record_limit` > 0 pools only each leaf's first records
/// (used by the acquisition-time sweep).
inline EstimatedDistribution estimate_distribution(const PartitionTree& tree, bool subtract,
                                                   std::size_t record_limit = 0) {
  EstimatedDistribution dist;
  dist.basis = tree.basis;
  dist.component = tree.component;
  dist.grid = tree.grid;
  for (const QuadNode* node : tree.leaves()) {
    if (node->records.empty())
      throw std::logic_error("estimate_distribution: leaf without records");
    LeafEstimate leaf;
    leaf.path = node->path;
    leaf.rect = node->rect;
    leaf.efficiency = node->efficiency;
    const std::size_t count = record_limit == 0
                                  ? node->records.size()
                                  : std::min(record_limit, node->records.size());
    for (std::size_t i = 0; i < count; ++i) {
      leaf.pooled_c += node->records[i].coincidences;
      leaf.pooled_a += node->records[i].accidentals;
      leaf.total_time += node->records[i].duration;
    }
    const double counts = subtract ? std::max(leaf.pooled_c - leaf.pooled_a, 0.0) : leaf.pooled_c;
    leaf.rate = counts / (leaf.efficiency * leaf.total_time);
    dist.leaves.push_back(std::move(leaf));
  }
  dist.matrix = detail::fill_from_leaves(dist.leaves, tree.grid.n);
  return dist;
}

enum class WitnessMethod { Raw, AccidentalSubtracted };
enum class UncertaintyMethod { Propagation, MonteCarlo };

inline const char* to_string(WitnessMethod m) {
  return m == WitnessMethod::Raw ? "raw" : "accidental_subtracted";
}
inline const char* to_string(UncertaintyMethod m) {
  return m == UncertaintyMethod::Propagation ? "propagation" : "monte_carlo";
}

/// Per-component pieces of the witness sum.
struct ComponentTerms {
  Component component = Component::X;
  double h_position = 0.0;  // H(X_a | X_b), bits
  double h_momentum = 0.0;  // H(K_a | K_b), bits
  double delta_x = 0.0;
  double delta_k = 0.0;
  double log_term = 0.0;  // log2(2 pi / (delta_x delta_k))
};

/// Witness evaluation: E_f lower bound in ebits with its component pieces.
struct WitnessResult {
  std::vector<ComponentTerms> components;
  double ef_bound = 0.0;
  double sigma = 0.0;  // 1 s.d., filled by the uncertainty analyses
  WitnessMethod method = WitnessMethod::Raw;
  UncertaintyMethod uncertainty_method = UncertaintyMethod::Propagation;

  /// The bound recomputed from the stored fields; equals ef_bound exactly.
  double recompute() const {
    double sum = 0.0;
    for (const ComponentTerms& t : components) sum += t.log_term - t.h_position - t.h_momentum;
    return sum;
  }
};

/// One component's (position, momentum) distribution pair.
struct ComponentPair {
  const EstimatedDistribution* position = nullptr;
  const EstimatedDistribution* momentum = nullptr;
};

namespace detail {

inline ComponentTerms witness_terms(Component comp, const Matrix& pos, double delta_x,
                                    const Matrix& mom, double delta_k) {
  ComponentTerms t;
  t.component = comp;
  t.h_position = conditional_entropy(pos);
  t.h_momentum = conditional_entropy(mom);
  t.delta_x = delta_x;
  t.delta_k = delta_k;
  t.log_term = std::log2(2.0 * M_PI / (delta_x * delta_k));
  return t;
}

}  // namespace detail

/// Entropic witness over the estimated distributions, one position/momentum
/// pair per component. Negative values certify nothing but are reported
/// as-is.
inline WitnessResult ef_bound(const std::vector<ComponentPair>& pairs, WitnessMethod method) {
  if (pairs.empty()) throw std::invalid_argument("ef_bound: no component pairs");
  WitnessResult result;
  result.method = method;
  for (const ComponentPair& pair : pairs) {
    if (pair.position == nullptr || pair.momentum == nullptr)
      throw std::invalid_argument("ef_bound: missing distribution in component pair");
    if (pair.position->basis != Basis::Position || pair.momentum->basis != Basis::Momentum)
      throw std::invalid_argument("ef_bound: pair distributions have wrong bases");
    if (pair.position->component != pair.momentum->component)
      throw std::invalid_argument("ef_bound: mismatched components in pair");
    result.components.push_back(detail::witness_terms(
        pair.position->component, pair.position->matrix, pair.position->grid.delta,
        pair.momentum->matrix, pair.momentum->grid.delta));
  }
  result.ef_bound = result.recompute();
  return result;
}

/// Witness on exact dense discretizations (no sampling): the ideal value a
/// run at these grids could reach. `grids` in kTreePairs order (xx, yy, kx,
/// ky).
inline WitnessResult oracle_ef_bound(const SourceModel& src, const std::vector<GridSpec>& grids) {
  if (grids.size() != kTreeCount)
    throw std::invalid_argument("oracle_ef_bound: expected four grids");
  WitnessResult result;
  result.method = WitnessMethod::Raw;
  for (Component comp : {Component::X, Component::Y}) {
    const std::size_t pi = comp == Component::X ? 0 : 1;
    const std::size_t ki = comp == Component::X ? 2 : 3;
    const JointDistribution pos = discretize(src, Basis::Position, comp, grids[pi]);
    const JointDistribution mom = discretize(src, Basis::Momentum, comp, grids[ki]);
    result.components.push_back(detail::witness_terms(comp, pos.matrix, grids[pi].delta,
                                                      mom.matrix, grids[ki].delta));
  }
  result.ef_bound = result.recompute();
  return result;
}

/// Largest value the witness can reach for the given pixel sizes: every
/// conditional entropy zero.
inline double max_certifiable(double delta_x, double delta_y, double delta_kx, double delta_ky) {
  if (!(delta_x > 0.0 && delta_y > 0.0 && delta_kx > 0.0 && delta_ky > 0.0))
    throw std::invalid_argument("max_certifiable: deltas must be positive");
  const double two_pi = 2.0 * M_PI;
  return std::log2(two_pi * two_pi / (delta_x * delta_y * delta_kx * delta_ky));
}

/// Measurement count needed for perfect diagonal correlations at N x N
/// resolution: 12 (N - log2 N - 2), valid for N >= 8.
inline long measurement_count_bound(int n) {
  if (n < 8 || !is_power_of_two(static_cast<std::uint64_t>(n)))
    throw std::domain_error("measurement_count_bound: n must be a power of two >= 8");
  const int log2n = static_cast<int>(std::round(std::log2(n)));
  return 12L * (n - log2n - 2);
}

/// Entanglement dimensionality certified by an E_f value: the least integer
/// D with D >= 2^ef (so ceil), or 1 when nothing is certified.
inline long dimensionality_bound(double ef) {
  if (!std::isfinite(ef)) throw std::invalid_argument("dimensionality_bound: ef must be finite");
  if (ef <= 0.0) return 1;
  return static_cast<long>(std::ceil(std::exp2(ef)));
}

/// floor(2^ef) convention used when a headline number truncates the power;
/// reported alongside the ceiling bound.
inline long dimensionality_bound_floor(double ef) {
  if (!std::isfinite(ef)) throw std::invalid_argument("dimensionality_bound: ef must be finite");
  if (ef <= 0.0) return 1;
  return static_cast<long>(std::floor(std::exp2(ef)));
}

}  // namespace quadwit
