#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadwit/grid.hpp"
#include "quadwit/joint_model.hpp"
#include "quadwit/measurement.hpp"

namespace quadwit {

struct RateEstimate {
  double rate = 0.0;   // events/s
  double sigma = 0.0;  // 1 s.d.
};

/// Node of the adaptive decomposition. `path` is the base-4 address from the
/// root (digit order NW, NE, SW, SE); records accumulate only while the node
/// is a leaf.
struct QuadNode {
  std::string path;
  Rect rect;
  std::vector<MeasurementRecord> records;
  bool stable = false;
  std::vector<QuadNode> children;  // empty or exactly 4
  ExpectedRates rates;             // cached expected rates for this rectangle
  double efficiency = 1.0;

  bool is_leaf() const { return children.empty(); }
  int depth() const { return static_cast<int>(path.size()); }

  /// Integer stream key for RNG substreams: base-4 path with a leading 1.
  std::uint64_t stream_key() const {
    std::uint64_t k = 1;
    for (char c : path) k = k * 4 + static_cast<std::uint64_t>(c - '0');
    return k;
  }
};

/// Heuristic knobs of the acquisition algorithm.
struct SamplerParams {
  double alpha = 0.002;      // split threshold as a fraction of R_T
  double beta = 2.0;         // standard deviations required for stability
  double gamma_frac = 0.15;  // unstable-leaf fraction ending the partition phase
  int max_depth = 0;         // 0 = full resolution (span-1 leaves allowed)
  int partition_pass_limit = 1000;
  int iterative_passes = 8;
  double time_budget = 0.0;  // model seconds, 0 = unlimited
  double rt_time = 10.0;     // duration of the total-rate measurement

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw std::invalid_argument("SamplerParams: alpha must be within [0, 1]");
    if (!(beta > 0.0)) throw std::invalid_argument("SamplerParams: beta must be positive");
    if (!(gamma_frac > 0.0 && gamma_frac <= 1.0))
      throw std::invalid_argument("SamplerParams: gamma_frac must be within (0, 1]");
    if (max_depth < 0) throw std::invalid_argument("SamplerParams: max_depth must be >= 0");
    if (partition_pass_limit < 1)
      throw std::invalid_argument("SamplerParams: partition_pass_limit must be >= 1");
    if (iterative_passes < 0)
      throw std::invalid_argument("SamplerParams: iterative_passes must be >= 0");
    if (!(rt_time > 0.0)) throw std::invalid_argument("SamplerParams: rt_time must be positive");
  }
};

/// Pooled rate estimate over a node's records: R_i = sum(C)/(eps k T_a),
/// optionally with accidental subtraction. The sigma keeps one count of
/// variance when nothing was seen, so zero-count nodes stabilize only after
/// enough accumulated time. `record_limit` > 0 pools only the first records.
inline RateEstimate node_rate(const QuadNode& node, bool subtract = false,
                              std::size_t record_limit = 0) {
  if (node.records.empty()) throw std::logic_error("node_rate: node has no records");
  const std::size_t count = record_limit == 0
                                ? node.records.size()
                                : std::min(record_limit, node.records.size());
  double sum_c = 0.0, sum_a = 0.0, time = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    sum_c += node.records[i].coincidences;
    sum_a += node.records[i].accidentals;
    time += node.records[i].duration;
  }
  const double eps = node.efficiency;
  RateEstimate est;
  const double counts = subtract ? std::max(sum_c - sum_a, 0.0) : sum_c;
  const double var = subtract ? sum_c + sum_a : sum_c;
  est.rate = counts / (eps * time);
  est.sigma = std::sqrt(std::max(var, 1.0)) / (eps * time);
  return est;
}

enum class Stability { Stable, Unstable };

/// A node is stable once the sign of (alpha R_T - R_i) is known to at least
/// beta standard deviations, the R_T estimate uncertainty included in
/// quadrature.
inline Stability stability_check(const QuadNode& node, double alpha, double beta,
                                 const RateEstimate& total) {
  const RateEstimate r = node_rate(node);
  const double margin = std::abs(r.rate - alpha * total.rate);
  const double sigma =
      std::sqrt(r.sigma * r.sigma + alpha * alpha * total.sigma * total.sigma);
  return margin >= beta * sigma ? Stability::Stable : Stability::Unstable;
}

/// Splits a leaf into its four sub-quadrants (initially unstable, no
/// records). The parent keeps its records but leaves the scan list.
inline void split(QuadNode& node, int max_depth_limit) {
  if (!node.is_leaf()) throw std::logic_error("split: node already has children");
  if (node.rect.rows < 2) throw std::logic_error("split: unit-span node cannot be split");
  if (node.depth() >= max_depth_limit)
    throw std::logic_error("split: node already at maximum depth");
  const int h = node.rect.rows / 2;
  node.children.resize(4);
  for (int q = 0; q < 4; ++q) {
    QuadNode& child = node.children[q];
    child.path = node.path + static_cast<char>('0' + q);
    child.rect = Rect::square(node.rect.row + (q >> 1) * h, node.rect.col + (q & 1) * h, h);
    child.stable = false;
  }
}

/// One adaptively sampled joint distribution.
struct PartitionTree {
  Basis basis = Basis::Position;
  Component component = Component::X;
  GridSpec grid;
  QuadNode root;
  RateEstimate total;          // R_T estimate driving the split threshold
  double model_time = 0.0;     // accumulated acquisition time, s
  int partition_passes = 0;
  int iterative_rounds = 0;
  bool budget_exhausted = false;

  std::vector<QuadNode*> leaves() {
    std::vector<QuadNode*> out;
    collect(root, out);
    return out;
  }
  std::vector<const QuadNode*> leaves() const {
    std::vector<const QuadNode*> out;
    collect_const(root, out);
    return out;
  }

 private:
  static void collect(QuadNode& n, std::vector<QuadNode*>& out) {
    if (n.is_leaf()) {
      out.push_back(&n);
      return;
    }
    for (QuadNode& c : n.children) collect(c, out);
  }
  static void collect_const(const QuadNode& n, std::vector<const QuadNode*>& out) {
    if (n.is_leaf()) {
      out.push_back(&n);
      return;
    }
    for (const QuadNode& c : n.children) collect_const(c, out);
  }
};

/// True when the leaves tile the n x n index space exactly once.
inline bool verify_leaf_tiling(const PartitionTree& tree) {
  const int n = tree.grid.n;
  std::vector<char> hit(static_cast<std::size_t>(n) * n, 0);
  for (const QuadNode* leaf : tree.leaves()) {
    if (!leaf->rect.within(n)) return false;
    for (int r = leaf->rect.row; r < leaf->rect.row_end(); ++r)
      for (int c = leaf->rect.col; c < leaf->rect.col_end(); ++c) {
        std::size_t idx = static_cast<std::size_t>(r) * n + c;
        if (hit[idx]) return false;
        hit[idx] = 1;
      }
  }
  for (char h : hit)
    if (!h) return false;
  return true;
}

/// Measures the total coincidence rate with every mirror on. Accidentals are
/// subtracted so the estimate converges to the configured total rate.
inline RateEstimate measure_total(const JointModel& model, double total_rate,
                                  const DetectorConfig& det, std::uint64_t tree_key,
                                  double duration) {
  if (!(duration > 0.0)) throw std::domain_error("measure_total: duration must be positive");
  const int n = model.grid_size();
  const Rect full = Rect::square(0, 0, n);
  const ExpectedRates rates = expected_rates(model, total_rate, full, det);
  const double eps = relative_efficiency(det, full, n);
  const MeasurementRecord rec =
      acquire(rates, det, eps, tree_key, /*node_key=*/0, /*pass_index=*/0, duration);
  RateEstimate est;
  est.rate = (rec.coincidences - rec.accidentals) / (eps * duration);
  est.sigma = std::sqrt(std::max(rec.coincidences + rec.accidentals, 1.0)) / (eps * duration);
  return est;
}

namespace detail {

inline void prepare_node(QuadNode& node, const JointModel& model, double total_rate,
                         const DetectorConfig& det) {
  node.rates = expected_rates(model, total_rate, node.rect, det);
  node.efficiency = relative_efficiency(det, node.rect, model.grid_size());
}

inline void acquire_once(PartitionTree& tree, QuadNode& node, const DetectorConfig& det,
                         std::uint64_t tree_key) {
  // The per-node record ordinal keys the RNG substream, so records are
  // reproducible whatever the scan order or phase structure.
  node.records.push_back(acquire(node.rates, det, node.efficiency, tree_key, node.stream_key(),
                                 node.records.size()));
  tree.model_time += node.records.back().duration;
}

inline bool budget_exceeded(const PartitionTree& tree, const SamplerParams& params) {
  return params.time_budget > 0.0 && tree.model_time >= params.time_budget;
}

/// Scan order: breadth-first, lexicographic in path within a level.
inline void sort_scan_list(std::vector<QuadNode*>& nodes) {
  std::sort(nodes.begin(), nodes.end(), [](const QuadNode* a, const QuadNode* b) {
    if (a->path.size() != b->path.size()) return a->path.size() < b->path.size();
    return a->path < b->path;
  });
}

}  // namespace detail

using PassLogger =
    std::function<void(const PartitionTree&, const char* phase, int pass, std::size_t leaves,
                       double unstable_fraction)>;

/// Initializes a tree with the root split into the four quadrants.
inline PartitionTree make_tree(Basis basis, Component comp, const GridSpec& grid,
                               const JointModel& model, double total_rate,
                               const DetectorConfig& det, int max_depth) {
  PartitionTree tree;
  tree.basis = basis;
  tree.component = comp;
  tree.grid = grid;
  tree.root.rect = Rect::square(0, 0, grid.n);
  detail::prepare_node(tree.root, model, total_rate, det);
  split(tree.root, max_depth);
  for (QuadNode& c : tree.root.children) detail::prepare_node(c, model, total_rate, det);
  return tree;
}

inline int effective_max_depth(const SamplerParams& params, const GridSpec& grid) {
  const int full = static_cast<int>(std::round(std::log2(grid.n)));
  return params.max_depth > 0 ? std::min(params.max_depth, full) : full;
}

/// Partitioning phase: passes over the unstable leaves, stabilizing and
/// splitting hot nodes, until the unstable fraction falls below gamma.
inline void partition_phase(PartitionTree& tree, const SamplerParams& params,
                            const JointModel& model, double total_rate,
                            const DetectorConfig& det, std::uint64_t tree_key,
                            const PassLogger& log = {}) {
  params.validate();
  const int max_depth = effective_max_depth(params, tree.grid);
  for (int pass = 0;; ++pass) {
    std::vector<QuadNode*> all = tree.leaves();
    std::vector<QuadNode*> unstable;
    for (QuadNode* leaf : all)
      if (!leaf->stable) unstable.push_back(leaf);
    const double fraction = static_cast<double>(unstable.size()) / all.size();
    if (log) log(tree, "partition", pass, all.size(), fraction);
    if (fraction < params.gamma_frac) break;
    if (pass >= params.partition_pass_limit || detail::budget_exceeded(tree, params)) {
      tree.budget_exhausted = true;
      break;
    }
    detail::sort_scan_list(unstable);
    for (QuadNode* leaf : unstable) {
      detail::acquire_once(tree, *leaf, det, tree_key);
      if (stability_check(*leaf, params.alpha, params.beta, tree.total) == Stability::Stable) {
        leaf->stable = true;
        const double rate = node_rate(*leaf).rate;
        if (rate >= params.alpha * tree.total.rate && leaf->rect.rows >= 2 &&
            leaf->depth() < max_depth) {
          split(*leaf, max_depth);
          for (QuadNode& c : leaf->children) detail::prepare_node(c, model, total_rate, det);
        }
      }
    }
    tree.partition_passes = pass + 1;
  }
}

/// Iterative phase: tops up late-created leaves to the common record count,
/// then adds uniform rounds, so every leaf ends with the same total
/// acquisition time.
inline void iterative_phase(PartitionTree& tree, const SamplerParams& params,
                            const DetectorConfig& det, std::uint64_t tree_key,
                            const PassLogger& log = {}) {
  params.validate();
  std::vector<QuadNode*> leaves = tree.leaves();
  detail::sort_scan_list(leaves);
  std::size_t target = 0;
  for (const QuadNode* leaf : leaves) target = std::max(target, leaf->records.size());
  if (target == 0) target = 1;
  for (QuadNode* leaf : leaves)
    while (leaf->records.size() < target) detail::acquire_once(tree, *leaf, det, tree_key);
  for (int round = 0; round < params.iterative_passes; ++round) {
    if (params.time_budget > 0.0 &&
        tree.model_time + static_cast<double>(leaves.size()) * det.acquisition_time >
            params.time_budget) {
      tree.budget_exhausted = true;
      break;
    }
    for (QuadNode* leaf : leaves) detail::acquire_once(tree, *leaf, det, tree_key);
    tree.iterative_rounds = round + 1;
    if (log) log(tree, "iterative", round, leaves.size(), 0.0);
  }
}

/// Runs total-rate measurement, partitioning, and the iterative phase for one
/// joint distribution.
inline PartitionTree run_tree_acquisition(Basis basis, Component comp, const GridSpec& grid,
                                          const JointModel& model, double total_rate,
                                          const DetectorConfig& det, const SamplerParams& params,
                                          std::uint64_t tree_key, const PassLogger& log = {}) {
  PartitionTree tree = make_tree(basis, comp, grid, model, total_rate, det,
                                 effective_max_depth(params, grid));
  tree.total = measure_total(model, total_rate, det, tree_key, params.rt_time);
  tree.model_time += params.rt_time;
  partition_phase(tree, params, model, total_rate, det, tree_key, log);
  iterative_phase(tree, params, det, tree_key, log);
  return tree;
}

/// Tree order for the four measured joint distributions.
inline constexpr std::size_t kTreeCount = 4;
inline constexpr std::pair<Basis, Component> kTreePairs[kTreeCount] = {
    {Basis::Position, Component::X},
    {Basis::Position, Component::Y},
    {Basis::Momentum, Component::X},
    {Basis::Momentum, Component::Y},
};
inline const char* tree_name(std::size_t i) {
  static const char* names[kTreeCount] = {"xx", "yy", "kx", "ky"};
  return names[i];
}

struct AcquisitionResult {
  std::vector<PartitionTree> trees;  // xx, yy, kx, ky
  SamplerParams params;
  std::uint64_t seed = 0;

  double model_time() const {
    double t = 0.0;
    for (const PartitionTree& tree : trees) t += tree.model_time;
    return t;
  }
  std::size_t total_leaves() const {
    std::size_t n = 0;
    for (const PartitionTree& tree : trees) n += tree.leaves().size();
    return n;
  }
};

/// Full acquisition over externally supplied joint models (one per tree pair,
/// in kTreePairs order). The Gaussian overload below is the production path;
/// this one lets synthetic distributions drive the sampler.
inline AcquisitionResult run_acquisition(const std::vector<const JointModel*>& models,
                                         const std::vector<GridSpec>& grids, double total_rate,
                                         const DetectorConfig& det, const SamplerParams& params,
                                         const PassLogger& log = {}) {
  if (models.size() != kTreeCount || grids.size() != kTreeCount)
    throw std::invalid_argument("run_acquisition: expected four models and four grids");
  AcquisitionResult result;
  result.params = params;
  result.seed = det.rng_seed;
  for (std::size_t i = 0; i < kTreeCount; ++i) {
    const auto [basis, comp] = kTreePairs[i];
    result.trees.push_back(run_tree_acquisition(basis, comp, grids[i], *models[i], total_rate,
                                                det, params, /*tree_key=*/i, log));
  }
  return result;
}

/// Full acquisition of the four Gaussian joint distributions.
inline AcquisitionResult run_acquisition(const SourceModel& src,
                                         const std::vector<GridSpec>& grids,
                                         const DetectorConfig& det, const SamplerParams& params,
                                         const PassLogger& log = {}) {
  if (grids.size() != kTreeCount)
    throw std::invalid_argument("run_acquisition: expected four grids");
  std::vector<GaussianJointModel> models;
  models.reserve(kTreeCount);
  for (std::size_t i = 0; i < kTreeCount; ++i)
    models.emplace_back(src, kTreePairs[i].first, kTreePairs[i].second, grids[i]);
  std::vector<const JointModel*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  return run_acquisition(ptrs, grids, src.total_rate, det, params, log);
}

}  // namespace quadwit
