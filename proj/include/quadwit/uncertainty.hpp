#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "quadwit/entropy.hpp"
#include "quadwit/rng.hpp"
#include "quadwit/witness.hpp"

namespace quadwit {

/// Result of one error analysis of the witness value.
struct UncertaintyReport {
  double ef_mean = 0.0;
  double ef_sigma = 0.0;
  UncertaintyMethod method = UncertaintyMethod::Propagation;
  int trials = 0;  // Monte Carlo only
  /// d E_f / d C_i per tree per leaf (propagation only).
  std::vector<std::vector<double>> sensitivity;
};

/// Delta-method standard deviation for independent Poisson inputs:
/// sqrt(sum_i partial_i^2 * variance_i).
inline double poisson_delta_sigma(const std::vector<double>& partials,
                                  const std::vector<double>& variances) {
  if (partials.size() != variances.size())
    throw std::invalid_argument("poisson_delta_sigma: size mismatch");
  KahanSum s;
  for (std::size_t i = 0; i < partials.size(); ++i)
    s.add(partials[i] * partials[i] * variances[i]);
  return std::sqrt(std::max(s.value(), 0.0));
}

namespace detail {

inline std::vector<ComponentPair> pair_up(const std::vector<EstimatedDistribution>& ests) {
  if (ests.size() != kTreeCount)
    throw std::invalid_argument("uncertainty: expected four estimated distributions");
  return {{&ests[0], &ests[2]}, {&ests[1], &ests[3]}};
}

/// d E_f / d r_i for every leaf of one tree. With the uniform fill rule and
/// normalization by the summed rate S,
///   d H(A|B) / d r_i = -(1/S) [ ln p_i - mean_{c in cols(i)} ln q_c + H_e(A|B) ]
/// where p_i is the leaf's cell value and q the party-b marginal; the witness
/// enters with opposite sign and a 1/ln2 bits conversion.
inline std::vector<double> rate_sensitivities(const EstimatedDistribution& est) {
  const Matrix& m = est.matrix;
  const std::vector<double> q = marginal_b(m);
  std::vector<double> log_q(q.size(), 0.0);
  for (std::size_t c = 0; c < q.size(); ++c) log_q[c] = q[c] > 0.0 ? std::log(q[c]) : 0.0;

  double total_rate = 0.0;
  for (const LeafEstimate& leaf : est.leaves) total_rate += leaf.rate;
  const double h_cond_e = conditional_entropy(m) * M_LN2;

  std::vector<double> out;
  out.reserve(est.leaves.size());
  for (const LeafEstimate& leaf : est.leaves) {
    // Zero-rate leaves sit at the entropy kink; they also carry zero Poisson
    // variance, so their sensitivity is reported as zero.
    if (!(leaf.rate > 0.0)) {
      out.push_back(0.0);
      continue;
    }
    const double ln_p = std::log(m(leaf.rect.row, leaf.rect.col));
    KahanSum cols;
    for (int c = leaf.rect.col; c < leaf.rect.col_end(); ++c) cols.add(log_q[c]);
    const double mean_ln_q = cols.value() / static_cast<double>(leaf.rect.cols);
    out.push_back((ln_p - mean_ln_q + h_cond_e) / (total_rate * M_LN2));
  }
  return out;
}

inline std::uint64_t leaf_stream_key(const std::string& path) {
  std::uint64_t k = 1;
  for (char c : path) k = k * 4 + static_cast<std::uint64_t>(c - '0');
  return k;
}

}  // namespace detail

/// First-order propagation of Poissonian counting uncertainty through the
/// witness, on estimates built from the measured leaf pools.
inline UncertaintyReport propagate_error(const std::vector<EstimatedDistribution>& ests,
                                         bool subtract) {
  UncertaintyReport report;
  report.method = UncertaintyMethod::Propagation;
  report.ef_mean = ef_bound(detail::pair_up(ests),
                            subtract ? WitnessMethod::AccidentalSubtracted : WitnessMethod::Raw)
                       .ef_bound;
  KahanSum var;
  for (const EstimatedDistribution& est : ests) {
    const std::vector<double> dr = detail::rate_sensitivities(est);
    std::vector<double> leaf_sens;
    leaf_sens.reserve(est.leaves.size());
    for (std::size_t i = 0; i < est.leaves.size(); ++i) {
      const LeafEstimate& leaf = est.leaves[i];
      const bool clamped = subtract && leaf.pooled_c - leaf.pooled_a <= 0.0;
      const double dc =
          clamped ? 0.0 : dr[i] / (leaf.efficiency * leaf.total_time);
      leaf_sens.push_back(dc);
      var.add(dc * dc * leaf.pooled_c);
      if (subtract) var.add(dc * dc * leaf.pooled_a);  // dEf/dA = -dEf/dC
    }
    report.sensitivity.push_back(std::move(leaf_sens));
  }
  report.ef_sigma = std::sqrt(std::max(var.value(), 0.0));
  return report;
}

inline UncertaintyReport propagate_error(const std::vector<PartitionTree>& trees, bool subtract) {
  std::vector<EstimatedDistribution> ests;
  for (const PartitionTree& t : trees) ests.push_back(estimate_distribution(t, subtract));
  return propagate_error(ests, subtract);
}

/// Per-trial witness values of the parametric bootstrap: every pooled
/// coincidence (and accidental) count is resampled as Poisson with the
/// measured value as mean, the distributions rebuilt, and the witness
/// recomputed. Deterministic per seed.
inline std::vector<double> monte_carlo_samples(const std::vector<EstimatedDistribution>& ests,
                                               bool subtract, int trials, std::uint64_t seed) {
  if (trials < 2) throw std::invalid_argument("monte_carlo: trials must be >= 2");
  (void)detail::pair_up(ests);  // validates shape up front
  std::vector<double> values;
  values.reserve(trials);
  std::vector<EstimatedDistribution> work = ests;
  for (int trial = 0; trial < trials; ++trial) {
    const std::uint64_t trial_key = derive_key(seed, static_cast<std::uint64_t>(trial) + 0x3c17);
    for (std::size_t t = 0; t < work.size(); ++t) {
      const std::uint64_t tree_key = derive_key(trial_key, t);
      double total = 0.0;
      for (std::size_t i = 0; i < work[t].leaves.size(); ++i) {
        LeafEstimate& leaf = work[t].leaves[i];
        const LeafEstimate& measured = ests[t].leaves[i];
        const std::uint64_t leaf_key =
            derive_key(tree_key, detail::leaf_stream_key(leaf.path));
        Substream sc(derive_key(leaf_key, 0));
        Substream sa(derive_key(leaf_key, 1));
        leaf.pooled_c = static_cast<double>(poisson_draw(measured.pooled_c, sc));
        leaf.pooled_a = static_cast<double>(poisson_draw(measured.pooled_a, sa));
        const double counts =
            subtract ? std::max(leaf.pooled_c - leaf.pooled_a, 0.0) : leaf.pooled_c;
        leaf.rate = counts / (leaf.efficiency * leaf.total_time);
        total += leaf.rate;
      }
      if (total > 0.0) {
        work[t].matrix = rebuild_matrix(work[t].leaves, work[t].grid.n);
      } else {
        // A trial with no surviving counts carries no information; the
        // max-entropy uniform matrix keeps the bound on the safe side.
        work[t].matrix = Matrix(work[t].grid.n,
                                1.0 / (static_cast<double>(work[t].grid.n) * work[t].grid.n));
      }
    }
    values.push_back(ef_bound(detail::pair_up(work),
                              subtract ? WitnessMethod::AccidentalSubtracted : WitnessMethod::Raw)
                         .ef_bound);
  }
  return values;
}

inline UncertaintyReport monte_carlo(const std::vector<EstimatedDistribution>& ests,
                                     bool subtract, int trials, std::uint64_t seed) {
  const std::vector<double> values = monte_carlo_samples(ests, subtract, trials, seed);
  KahanSum mean_sum;
  for (double v : values) mean_sum.add(v);
  const double mean = mean_sum.value() / trials;
  KahanSum var_sum;
  for (double v : values) var_sum.add((v - mean) * (v - mean));
  UncertaintyReport report;
  report.method = UncertaintyMethod::MonteCarlo;
  report.trials = trials;
  report.ef_mean = mean;
  report.ef_sigma = std::sqrt(var_sum.value() / (trials - 1));
  return report;
}

inline UncertaintyReport monte_carlo(const std::vector<PartitionTree>& trees, bool subtract,
                                     int trials, std::uint64_t seed) {
  std::vector<EstimatedDistribution> ests;
  for (const PartitionTree& t : trees)
    ests.push_back(estimate_distribution(t, /*subtract=*/false));
  return monte_carlo(ests, subtract, trials, seed);
}

}  // namespace quadwit
