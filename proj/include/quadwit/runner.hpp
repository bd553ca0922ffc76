#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "quadwit/config.hpp"
#include "quadwit/io.hpp"
#include "quadwit/quadtree.hpp"
#include "quadwit/uncertainty.hpp"
#include "quadwit/witness.hpp"

namespace quadwit {

struct RunOptions {
  bool quiet = false;
  bool reanalyze = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<SubtractMode> subtract;
};

inline void apply_overrides(ExperimentConfig& cfg, const RunOptions& opts) {
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.detector.rng_seed = *opts.seed;
  }
  if (opts.out_dir) cfg.out_dir = *opts.out_dir;
  if (opts.subtract) cfg.subtract = *opts.subtract;
}

inline std::string tree_label(Basis basis, Component comp) {
  const char c = comp == Component::X ? 'x' : 'y';
  return basis == Basis::Position ? std::string{c, c} : std::string{'k', c};
}

inline PassLogger stderr_logger(bool quiet) {
  if (quiet) return {};
  return [](const PartitionTree& tree, const char* phase, int pass, std::size_t leaves,
            double unstable) {
    std::cerr << "[" << tree_label(tree.basis, tree.component) << "] " << phase << " pass "
              << pass << ": leaves=" << leaves << " unstable_fraction=" << unstable << "\n";
  };
}

/// Witness plus both error analyses for one subtraction mode. The headline
/// sigma on the witness comes from propagation, matching the published
/// analysis; the Monte Carlo result rides alongside.
struct AnalysisSet {
  WitnessResult witness;
  UncertaintyReport propagation;
  UncertaintyReport monte_carlo;
  std::vector<double> mc_samples;  // kept only when dumping is requested
};

struct SimulationResult {
  AcquisitionResult acquisition;
  std::vector<EstimatedDistribution> estimates_raw;
  std::vector<EstimatedDistribution> estimates_subtracted;
  std::optional<AnalysisSet> raw;
  std::optional<AnalysisSet> subtracted;
};

namespace detail {

inline std::vector<ComponentPair> pairs_of(const std::vector<EstimatedDistribution>& ests) {
  return {{&ests[0], &ests[2]}, {&ests[1], &ests[3]}};
}

inline std::uint64_t mc_seed(std::uint64_t seed, bool subtract) {
  return derive_key(seed, subtract ? 0xAC5Du : 0xAC5Cu);
}

inline AnalysisSet analyze(const std::vector<EstimatedDistribution>& ests,
                           const std::vector<EstimatedDistribution>& raw_pools, bool subtract,
                           const ExperimentConfig& cfg) {
  AnalysisSet set;
  set.witness = ef_bound(pairs_of(ests),
                         subtract ? WitnessMethod::AccidentalSubtracted : WitnessMethod::Raw);
  set.propagation = propagate_error(ests, subtract);
  set.witness.sigma = set.propagation.ef_sigma;
  set.witness.uncertainty_method = UncertaintyMethod::Propagation;
  const std::uint64_t seed = mc_seed(cfg.seed, subtract);
  set.monte_carlo = monte_carlo(raw_pools, subtract, cfg.mc_trials, seed);
  if (cfg.dump_mc_trials)
    set.mc_samples = monte_carlo_samples(raw_pools, subtract, cfg.mc_trials, seed);
  return set;
}

}  // namespace detail

/// Acquires the four distributions and runs the requested analyses.
inline SimulationResult run_simulation(const ExperimentConfig& cfg, const PassLogger& log = {}) {
  cfg.validate();
  SimulationResult result;
  result.acquisition = run_acquisition(cfg.source(), cfg.grids(), cfg.detector, cfg.sampler, log);
  for (const PartitionTree& tree : result.acquisition.trees) {
    result.estimates_raw.push_back(estimate_distribution(tree, false));
    result.estimates_subtracted.push_back(estimate_distribution(tree, true));
  }
  if (cfg.subtract != SubtractMode::On)
    result.raw = detail::analyze(result.estimates_raw, result.estimates_raw, false, cfg);
  if (cfg.subtract != SubtractMode::Off)
    result.subtracted =
        detail::analyze(result.estimates_subtracted, result.estimates_raw, true, cfg);
  return result;
}

inline double naive_measurement_count(int n) {
  const double nn = static_cast<double>(n);
  return 2.0 * nn * nn * nn * nn;
}

namespace detail {

inline ordered_json config_echo(const ExperimentConfig& cfg) {
  ordered_json j;
  j["source.sigma_sum_x"] = cfg.sigma_sum_x;
  j["source.sigma_diff_x"] = cfg.sigma_diff_x;
  j["source.sigma_sum_y"] = cfg.sigma_sum_y;
  j["source.sigma_diff_y"] = cfg.sigma_diff_y;
  const SourceModel src = cfg.source();
  j["source.k_sigma_sum_x"] = src.k_sigma_sum_x;
  j["source.k_sigma_diff_x"] = src.k_sigma_diff_x;
  j["source.k_sigma_sum_y"] = src.k_sigma_sum_y;
  j["source.k_sigma_diff_y"] = src.k_sigma_diff_y;
  j["source.total_rate"] = cfg.total_rate;
  j["detector.acquisition_time"] = cfg.detector.acquisition_time;
  j["detector.coincidence_window"] = cfg.detector.coincidence_window;
  j["detector.accidental_offset"] = cfg.detector.accidental_offset;
  j["detector.singles_rate_a"] = cfg.detector.singles_rate_a;
  j["detector.singles_rate_b"] = cfg.detector.singles_rate_b;
  j["detector.efficiency_model"] =
      cfg.detector.efficiency_model == EfficiencyModel::Uniform ? "uniform" : "smooth_field";
  j["detector.noise"] = cfg.detector.noise == NoiseModel::Poisson ? "poisson" : "none";
  j["grid.n"] = cfg.grid_n;
  const std::vector<GridSpec> grids = cfg.grids();
  j["grid.position_extent_x"] = grids[0].extent;
  j["grid.position_extent_y"] = grids[1].extent;
  j["grid.momentum_extent_x"] = grids[2].extent;
  j["grid.momentum_extent_y"] = grids[3].extent;
  j["sampler.alpha"] = cfg.sampler.alpha;
  j["sampler.beta"] = cfg.sampler.beta;
  j["sampler.gamma"] = cfg.sampler.gamma_frac;
  j["sampler.max_depth"] = cfg.sampler.max_depth;
  j["sampler.partition_pass_limit"] = cfg.sampler.partition_pass_limit;
  j["sampler.iterative_passes"] = cfg.sampler.iterative_passes;
  j["sampler.time_budget"] = cfg.sampler.time_budget;
  j["sampler.rt_time"] = cfg.sampler.rt_time;
  j["analysis.subtract"] = to_string(cfg.subtract);
  j["analysis.mc_trials"] = cfg.mc_trials;
  j["analysis.dump_mc_trials"] = cfg.dump_mc_trials;
  j["run.seed"] = cfg.seed;
  // run.out_dir deliberately not echoed: identical experiments written to
  // different directories produce identical summaries.
  return j;
}

inline ordered_json analysis_to_json(const AnalysisSet& set) {
  ordered_json j = witness_to_json(set.witness);
  j["uncertainty"]["propagation"] = uncertainty_to_json(set.propagation);
  j["uncertainty"]["monte_carlo"] = uncertainty_to_json(set.monte_carlo);
  return j;
}

}  // namespace detail

inline ordered_json build_summary(const ExperimentConfig& cfg, const SimulationResult& result) {
  ordered_json j;
  j["schema_version"] = 1;
  j["generated_at"] = now_iso8601();
  j["seed"] = cfg.seed;
  j["config"] = detail::config_echo(cfg);

  ordered_json acq;
  acq["model_time_s"] = result.acquisition.model_time();
  const std::size_t leaves = result.acquisition.total_leaves();
  acq["total_leaves"] = leaves;
  acq["naive_count"] = naive_measurement_count(cfg.grid_n);
  acq["improvement_factor"] = naive_measurement_count(cfg.grid_n) / static_cast<double>(leaves);
  ordered_json trees = ordered_json::array();
  for (std::size_t i = 0; i < result.acquisition.trees.size(); ++i) {
    const PartitionTree& tree = result.acquisition.trees[i];
    ordered_json t;
    t["name"] = tree_name(i);
    t["basis"] = to_string(tree.basis);
    t["component"] = to_string(tree.component);
    t["n"] = tree.grid.n;
    t["extent"] = tree.grid.extent;
    t["delta"] = tree.grid.delta;
    t["rt_rate"] = tree.total.rate;
    t["rt_sigma"] = tree.total.sigma;
    t["leaf_count"] = tree.leaves().size();
    t["partition_passes"] = tree.partition_passes;
    t["iterative_rounds"] = tree.iterative_rounds;
    t["model_time_s"] = tree.model_time;
    t["budget_exhausted"] = tree.budget_exhausted;
    trees.push_back(t);
  }
  acq["trees"] = trees;
  j["acquisition"] = acq;

  if (result.raw) j["witness"]["raw"] = detail::analysis_to_json(*result.raw);
  if (result.subtracted)
    j["witness"]["accidental_subtracted"] = detail::analysis_to_json(*result.subtracted);
  return j;
}

inline void write_simulation_outputs(const ExperimentConfig& cfg, const SimulationResult& result,
                                     const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  {
    std::ofstream out(dir / "summary.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write summary.json");
    out << build_summary(cfg, result).dump(2) << "\n";
  }
  for (std::size_t i = 0; i < result.estimates_raw.size(); ++i)
    write_leaf_csv((dir / ("leaves_" + std::string(tree_name(i)) + ".csv")).string(),
                   tree_name(i), result.estimates_raw[i]);
  write_partition_csv((dir / "partitions.csv").string(), result.estimates_raw);
  auto dump_samples = [&](const std::optional<AnalysisSet>& set, const char* name) {
    if (!set || set->mc_samples.empty()) return;
    std::ofstream out(dir / name, std::ios::binary);
    out << "trial,ef_ebits\n";
    for (std::size_t t = 0; t < set->mc_samples.size(); ++t)
      out << t << ',' << format_double(set->mc_samples[t]) << "\n";
  };
  dump_samples(result.raw, "mc_trials_raw.csv");
  dump_samples(result.subtracted, "mc_trials_subtracted.csv");
}

/// Rebuilds estimates and witness results from summary.json plus the leaf
/// CSVs, without re-simulation.
struct ReanalysisResult {
  std::vector<EstimatedDistribution> estimates_raw;
  std::vector<EstimatedDistribution> estimates_subtracted;
  std::optional<AnalysisSet> raw;
  std::optional<AnalysisSet> subtracted;
};

inline ReanalysisResult reanalyze_outputs(const ExperimentConfig& cfg,
                                          const std::string& data_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(data_dir);
  std::ifstream in(dir / "summary.json");
  if (!in) throw std::runtime_error("cannot read summary.json in " + data_dir);
  ordered_json summary = ordered_json::parse(in);

  ReanalysisResult result;
  ExperimentConfig run_cfg = cfg;
  // The summary is the record of the run; its seed drives the Monte Carlo
  // substreams so reanalysis reproduces the original numbers exactly.
  run_cfg.seed = summary.at("seed").get<std::uint64_t>();
  const auto& trees = summary.at("acquisition").at("trees");
  if (trees.size() != kTreeCount) throw std::runtime_error("summary lists wrong tree count");
  for (std::size_t i = 0; i < kTreeCount; ++i) {
    const auto& t = trees[i];
    GridSpec grid(t.at("n").get<int>(), t.at("extent").get<double>());
    std::vector<LeafEstimate> leaves =
        read_leaf_csv((dir / ("leaves_" + std::string(tree_name(i)) + ".csv")).string());
    auto build = [&](bool subtract) {
      EstimatedDistribution est;
      est.basis = kTreePairs[i].first;
      est.component = kTreePairs[i].second;
      est.grid = grid;
      est.leaves = leaves;
      for (LeafEstimate& leaf : est.leaves) {
        const double counts =
            subtract ? std::max(leaf.pooled_c - leaf.pooled_a, 0.0) : leaf.pooled_c;
        leaf.rate = counts / (leaf.efficiency * leaf.total_time);
      }
      est.matrix = rebuild_matrix(est.leaves, grid.n);
      return est;
    };
    result.estimates_raw.push_back(build(false));
    result.estimates_subtracted.push_back(build(true));
  }
  if (run_cfg.subtract != SubtractMode::On)
    result.raw = detail::analyze(result.estimates_raw, result.estimates_raw, false, run_cfg);
  if (run_cfg.subtract != SubtractMode::Off)
    result.subtracted =
        detail::analyze(result.estimates_subtracted, result.estimates_raw, true, run_cfg);
  return result;
}

struct SweepTimeRow {
  double time_per_partition = 0.0;  // s
  double ef_raw = 0.0, sigma_raw = 0.0;
  double ef_subtracted = 0.0, sigma_subtracted = 0.0;
};

/// Witness versus acquisition time: one growing run, checkpoints evaluated on
/// each leaf's first-p-record pools so every row reflects an equal
/// time-per-partition.
inline std::vector<SweepTimeRow> run_sweep_time(const ExperimentConfig& cfg,
                                                const std::vector<int>& passes,
                                                const PassLogger& log = {}) {
  if (passes.empty()) throw std::invalid_argument("sweep-time: empty pass list");
  ExperimentConfig run_cfg = cfg;
  run_cfg.sampler.iterative_passes =
      std::max(run_cfg.sampler.iterative_passes, *std::max_element(passes.begin(), passes.end()));
  AcquisitionResult acq =
      run_acquisition(run_cfg.source(), run_cfg.grids(), run_cfg.detector, run_cfg.sampler, log);
  std::vector<SweepTimeRow> rows;
  for (int p : passes) {
    std::vector<EstimatedDistribution> est_raw, est_sub;
    for (const PartitionTree& tree : acq.trees) {
      est_raw.push_back(estimate_distribution(tree, false, static_cast<std::size_t>(p)));
      est_sub.push_back(estimate_distribution(tree, true, static_cast<std::size_t>(p)));
    }
    SweepTimeRow row;
    row.time_per_partition = p * run_cfg.detector.acquisition_time;
    const UncertaintyReport prop_raw = propagate_error(est_raw, false);
    const UncertaintyReport prop_sub = propagate_error(est_sub, true);
    row.ef_raw = prop_raw.ef_mean;
    row.sigma_raw = prop_raw.ef_sigma;
    row.ef_subtracted = prop_sub.ef_mean;
    row.sigma_subtracted = prop_sub.ef_sigma;
    rows.push_back(row);
  }
  return rows;
}

struct SweepResolutionRow {
  int n = 0;
  std::size_t leaf_count = 0;
  double naive_count = 0.0;
  double improvement = 0.0;
  double ef = 0.0;
  double sigma = 0.0;
  double oracle_ef = 0.0;
};

/// Witness versus maximum resolution: a fresh acquisition per grid size,
/// with the dense-grid oracle value alongside.
inline std::vector<SweepResolutionRow> run_sweep_resolution(const ExperimentConfig& cfg,
                                                            const std::vector<int>& resolutions,
                                                            const PassLogger& log = {}) {
  if (resolutions.empty()) throw std::invalid_argument("sweep-resolution: empty n list");
  std::vector<SweepResolutionRow> rows;
  for (int n : resolutions) {
    if (n < 2 || !is_power_of_two(static_cast<std::uint64_t>(n)))
      throw std::invalid_argument("sweep-resolution: n values must be powers of two >= 2");
    ExperimentConfig run_cfg = cfg;
    run_cfg.grid_n = n;
    run_cfg.sampler.max_depth = 0;  // full depth at each resolution
    AcquisitionResult acq =
        run_acquisition(run_cfg.source(), run_cfg.grids(), run_cfg.detector, run_cfg.sampler, log);
    const bool subtract = cfg.subtract == SubtractMode::On;
    std::vector<EstimatedDistribution> ests;
    for (const PartitionTree& tree : acq.trees)
      ests.push_back(estimate_distribution(tree, subtract));
    const UncertaintyReport prop = propagate_error(ests, subtract);
    SweepResolutionRow row;
    row.n = n;
    row.leaf_count = acq.total_leaves();
    row.naive_count = naive_measurement_count(n);
    row.improvement = row.naive_count / static_cast<double>(row.leaf_count);
    row.ef = prop.ef_mean;
    row.sigma = prop.ef_sigma;
    row.oracle_ef = oracle_ef_bound(run_cfg.source(), run_cfg.grids()).ef_bound;
    rows.push_back(row);
  }
  return rows;
}

struct OracleReport {
  WitnessResult oracle;        // dense-grid exact witness at the configured grids
  double max_certifiable = 0;  // all conditional entropies zero
  double continuous = 0;       // analytic Gaussian limit
};

inline OracleReport run_oracle(const ExperimentConfig& cfg) {
  cfg.validate();
  OracleReport report;
  const std::vector<GridSpec> grids = cfg.grids();
  report.oracle = oracle_ef_bound(cfg.source(), grids);
  report.max_certifiable =
      max_certifiable(grids[0].delta, grids[1].delta, grids[2].delta, grids[3].delta);
  report.continuous = continuous_witness_value(cfg.source());
  return report;
}

// ---------------------------------------------------------------------------
// CLI entry points. Exit codes: 0 success, 2 config error, 3 runtime error.

namespace detail {

template <typename Body>
int guarded(const Body& body) {
  try {
    body();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

inline void print_analysis(std::ostream& os, const char* label, const AnalysisSet& set) {
  os << "E_f (" << label << ") = " << set.witness.ef_bound << " +/- " << set.witness.sigma
     << " ebits (propagation); monte carlo " << set.monte_carlo.ef_mean << " +/- "
     << set.monte_carlo.ef_sigma << " ebits over " << set.monte_carlo.trials << " trials\n";
  os << "  dimensionality D >= " << dimensionality_bound_floor(set.witness.ef_bound)
     << " (floor convention; ceil " << dimensionality_bound(set.witness.ef_bound) << ")\n";
}

}  // namespace detail

inline int cmd_simulate(const std::string& config_path, const RunOptions& opts = {}) {
  return detail::guarded([&] {
    ExperimentConfig cfg = load_config(config_path);
    apply_overrides(cfg, opts);
    if (opts.reanalyze) {
      const ReanalysisResult re = reanalyze_outputs(cfg, cfg.out_dir);
      if (!opts.quiet) {
        if (re.raw) detail::print_analysis(std::cout, "raw", *re.raw);
        if (re.subtracted) detail::print_analysis(std::cout, "subtracted", *re.subtracted);
      }
      return;
    }
    const SimulationResult result = run_simulation(cfg, stderr_logger(opts.quiet));
    write_simulation_outputs(cfg, result, cfg.out_dir);
    if (!opts.quiet) {
      std::cout << "total leaves: " << result.acquisition.total_leaves() << " (naive "
                << naive_measurement_count(cfg.grid_n) << ", improvement "
                << naive_measurement_count(cfg.grid_n) /
                       static_cast<double>(result.acquisition.total_leaves())
                << ")\n";
      if (result.raw) detail::print_analysis(std::cout, "raw", *result.raw);
      if (result.subtracted) detail::print_analysis(std::cout, "subtracted", *result.subtracted);
      std::cout << "outputs written to " << cfg.out_dir << "\n";
    }
  });
}

inline int cmd_sweep_time(const std::string& config_path, const std::vector<int>& passes,
                          const RunOptions& opts = {}) {
  return detail::guarded([&] {
    ExperimentConfig cfg = load_config(config_path);
    apply_overrides(cfg, opts);
    const std::vector<int> list = passes.empty() ? cfg.sweep_passes : passes;
    const std::vector<SweepTimeRow> rows = run_sweep_time(cfg, list, stderr_logger(opts.quiet));
    std::filesystem::create_directories(cfg.out_dir);
    const std::string path = (std::filesystem::path(cfg.out_dir) / "sweep_time.csv").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "time_per_partition_s,ef_raw,sigma_raw,ef_subtracted,sigma_subtracted\n";
    for (const SweepTimeRow& r : rows)
      out << format_double(r.time_per_partition) << ',' << format_double(r.ef_raw) << ','
          << format_double(r.sigma_raw) << ',' << format_double(r.ef_subtracted) << ','
          << format_double(r.sigma_subtracted) << "\n";
    if (!opts.quiet) std::cout << "wrote " << path << " (" << rows.size() << " checkpoints)\n";
  });
}

inline int cmd_sweep_resolution(const std::string& config_path,
                                const std::vector<int>& resolutions,
                                const RunOptions& opts = {}) {
  return detail::guarded([&] {
    ExperimentConfig cfg = load_config(config_path);
    apply_overrides(cfg, opts);
    const std::vector<int> list = resolutions.empty() ? cfg.sweep_resolutions : resolutions;
    const std::vector<SweepResolutionRow> rows =
        run_sweep_resolution(cfg, list, stderr_logger(opts.quiet));
    std::filesystem::create_directories(cfg.out_dir);
    const std::string path =
        (std::filesystem::path(cfg.out_dir) / "sweep_resolution.csv").string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "n,leaf_count,naive_count,improvement,ef,sigma,oracle_ef\n";
    for (const SweepResolutionRow& r : rows)
      out << r.n << ',' << r.leaf_count << ',' << format_double(r.naive_count) << ','
          << format_double(r.improvement) << ',' << format_double(r.ef) << ','
          << format_double(r.sigma) << ',' << format_double(r.oracle_ef) << "\n";
    if (!opts.quiet) std::cout << "wrote " << path << " (" << rows.size() << " resolutions)\n";
  });
}

inline int cmd_oracle(const std::string& config_path, const RunOptions& opts = {}) {
  return detail::guarded([&] {
    ExperimentConfig cfg = load_config(config_path);
    apply_overrides(cfg, opts);
    const OracleReport report = run_oracle(cfg);
    std::cout << "oracle_ef_bound_ebits = " << format_double(report.oracle.ef_bound) << "\n";
    std::cout << "max_certifiable_ebits = " << format_double(report.max_certifiable) << "\n";
    std::cout << "continuous_witness_ebits = " << format_double(report.continuous) << "\n";
    for (const ComponentTerms& t : report.oracle.components)
      std::cout << "component " << to_string(t.component) << ": h_position_bits = "
                << format_double(t.h_position) << ", h_momentum_bits = "
                << format_double(t.h_momentum) << ", log_term_bits = "
                << format_double(t.log_term) << "\n";
  });
}

}  // namespace quadwit
