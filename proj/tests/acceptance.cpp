// Acceptance suite: end-to-end checks of the full pipeline, one test case per
// criterion, each printing a PASS/FAIL line with the measured numbers.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "quadwit/quadwit.hpp"
#include "test_helpers.hpp"

using namespace quadwit;

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Criterion {
  int id;
  std::string name;
  Clock::time_point start = Clock::now();

  Criterion(int id_, std::string name_) : id(id_), name(std::move(name_)) {}

  void report(bool pass, const std::string& details) const {
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    std::ostringstream line;
    line << "ACCEPTANCE " << id << " [" << name << "]: " << (pass ? "PASS" : "FAIL") << " ("
         << details << ") [" << elapsed << " s]";
    std::cout << line.str() << std::endl;
    CHECK(pass);
  }
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

ExperimentConfig parse(const std::string& body) {
  std::istringstream in(body);
  return parse_config(in, "<acceptance>");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double ef_of(const std::vector<EstimatedDistribution>& ests, bool subtract) {
  return ef_bound({{&ests[0], &ests[2]}, {&ests[1], &ests[3]}},
                  subtract ? WitnessMethod::AccidentalSubtracted : WitnessMethod::Raw)
      .ef_bound;
}

}  // namespace

TEST_CASE("criterion 1: diagonal partition count matches the closed-form estimate") {
  Criterion crit(1, "perfect-diagonal leaf count vs 12(N - log2 N - 2)");
  // Four perfectly correlated joint distributions at N = 512 (diagonal in
  // position, anti-diagonal in momentum), noise-free, split threshold below
  // the single-pixel rate fraction.
  DetectorConfig det;
  det.noise = NoiseModel::None;
  SamplerParams params;
  params.alpha = 0.001;
  params.iterative_passes = 0;
  const int n = 512;
  std::vector<GridSpec> grids(kTreeCount, GridSpec(n, 1.0));
  DiagonalJointModel xx(n, false), yy(n, false), kx(n, true), ky(n, true);
  const std::vector<const JointModel*> models = {&xx, &yy, &kx, &ky};
  const AcquisitionResult acq = run_acquisition(models, grids, 26400.0, det, params);

  for (const PartitionTree& tree : acq.trees) REQUIRE(verify_leaf_tiling(tree));
  const double leaves = static_cast<double>(acq.total_leaves());
  const double target = 6096.0;  // quoted rounding of 12(N - log2 N - 2) = 6012
  const bool pass = std::abs(leaves - target) / target <= 0.15;
  crit.report(pass, "total leaves " + fmt(leaves, 6) + ", formula value " +
                        fmt(static_cast<double>(measurement_count_bound(n)), 6) +
                        ", target 6096 +/- 15%");
}

TEST_CASE("criterion 2: compression bracket at N = 512 under Poisson noise") {
  Criterion crit(2, "leaf total in [3000, 30000] and improvement >= 1e4");
  ExperimentConfig cfg = parse(
      "grid.n = 512\n"
      "detector.singles_rate_a = 1.0e6\n"
      "detector.singles_rate_b = 1.0e6\n"
      "sampler.iterative_passes = 2\n"
      "analysis.mc_trials = 2\n"
      "run.seed = 11\n");
  const AcquisitionResult acq =
      run_acquisition(cfg.source(), cfg.grids(), cfg.detector, cfg.sampler);
  const double leaves = static_cast<double>(acq.total_leaves());
  const double improvement = naive_measurement_count(512) / leaves;
  const bool pass = leaves >= 3000.0 && leaves <= 30000.0 && improvement >= 1e4;
  crit.report(pass, "total leaves " + fmt(leaves, 6) + " vs naive 2*512^4 = " +
                        fmt(naive_measurement_count(512), 4) + ", improvement " +
                        fmt(improvement, 4));
}

TEST_CASE("criterion 3: witness soundness chain over randomized sources") {
  Criterion crit(3, "E_f(tree) <= E_f(exact grid) <= analytic Gaussian value");
  Substream rng(777);
  int violations = 0;
  double worst_margin = 1e9;
  for (int trial = 0; trial < 20; ++trial) {
    const double ssum = (0.5 + 1.5 * rng.next_double()) * 1e-3;
    const double ratio = 2.0 + 14.0 * rng.next_double();
    ExperimentConfig cfg;
    cfg.sigma_sum_x = cfg.sigma_sum_y = ssum;
    cfg.sigma_diff_x = cfg.sigma_diff_y = ssum / ratio;
    cfg.grid_n = 64;
    cfg.detector.noise = NoiseModel::None;
    cfg.detector.singles_rate_a = cfg.detector.singles_rate_b = 0.0;
    cfg.sampler.alpha = 0.002 + 0.006 * rng.next_double();
    cfg.sampler.iterative_passes = 0;
    const AcquisitionResult acq =
        run_acquisition(cfg.source(), cfg.grids(), cfg.detector, cfg.sampler);
    std::vector<EstimatedDistribution> ests;
    for (const PartitionTree& t : acq.trees) ests.push_back(estimate_distribution(t, false));
    const double ef_tree = ef_of(ests, false);
    const double ef_exact = oracle_ef_bound(cfg.source(), cfg.grids()).ef_bound;
    const double ef_cont = continuous_witness_value(cfg.source());
    if (!(ef_tree <= ef_exact + 1e-9 && ef_exact <= ef_cont + 1e-9)) ++violations;
    worst_margin = std::min({worst_margin, ef_exact - ef_tree, ef_cont - ef_exact});
  }
  crit.report(violations == 0, "20 noise-free configs at n = 64, violations " +
                                   std::to_string(violations) + ", smallest margin " +
                                   fmt(worst_margin, 3));
}

TEST_CASE("criterion 4: dense-grid oracle convergence and monotone resolution sweep") {
  Criterion crit(4, "oracle within 0.05 ebits of analytic; E_f(n) non-decreasing");
  const std::string source_cfg =
      "source.sigma_sum_x = 1.2e-3\nsource.sigma_diff_x = 2.0e-4\n"
      "source.sigma_sum_y = 1.2e-3\nsource.sigma_diff_y = 2.0e-4\n";
  ExperimentConfig cfg = parse(source_cfg +
                               "grid.n = 256\n"
                               "detector.singles_rate_a = 0\n"
                               "detector.singles_rate_b = 0\n"
                               "sampler.iterative_passes = 8\n"
                               "analysis.subtract = off\n"
                               "run.seed = 17\n");
  const double oracle = oracle_ef_bound(cfg.source(), cfg.grids()).ef_bound;
  const double analytic = continuous_witness_value(cfg.source());
  const bool close = std::abs(oracle - analytic) <= 0.05 && oracle <= analytic + 1e-9;

  const std::vector<SweepResolutionRow> rows = run_sweep_resolution(cfg, {32, 64, 128, 256});
  bool monotone = true;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double slack =
        2.0 * std::sqrt(rows[i].sigma * rows[i].sigma + rows[i - 1].sigma * rows[i - 1].sigma);
    if (rows[i].ef < rows[i - 1].ef - slack) monotone = false;
  }
  const bool below = rows.back().ef <= rows.back().oracle_ef + 2.0 * rows.back().sigma;
  crit.report(close && monotone && below,
              "oracle(n=256) " + fmt(oracle) + " vs analytic " + fmt(analytic) +
                  " (|diff| = " + fmt(std::abs(oracle - analytic), 2) + "); sweep E_f " +
                  fmt(rows[0].ef) + " -> " + fmt(rows[1].ef) + " -> " + fmt(rows[2].ef) +
                  " -> " + fmt(rows[3].ef) + " vs oracle " + fmt(rows[3].oracle_ef));
}

TEST_CASE("criterion 5: short-time overestimation bias and accidental subtraction gap") {
  Criterion crit(5, "sparse-checkpoint E_f exceeds converged E_f by > 2 sigma");
  ExperimentConfig cfg = parse(
      "grid.n = 512\n"
      "detector.singles_rate_a = 1.0e6\n"
      "detector.singles_rate_b = 1.0e6\n"
      "analysis.mc_trials = 2\n"
      "run.seed = 31\n");
  const std::vector<SweepTimeRow> rows = run_sweep_time(cfg, {1, 2, 4, 8, 16, 32});
  const SweepTimeRow& first = rows.front();
  const SweepTimeRow& last = rows.back();
  const double gap = first.ef_raw - last.ef_raw;
  const double sigma = std::sqrt(first.sigma_raw * first.sigma_raw +
                                 last.sigma_raw * last.sigma_raw);
  const bool bias = gap > 2.0 * sigma;
  const bool subtraction_gap = last.ef_subtracted > last.ef_raw;
  bool sigma_positive = true;
  for (const SweepTimeRow& r : rows)
    if (!(r.sigma_raw > 0.0 && r.sigma_subtracted > 0.0)) sigma_positive = false;
  crit.report(bias && subtraction_gap && sigma_positive,
              "raw E_f sparse " + fmt(first.ef_raw) + " vs converged " + fmt(last.ef_raw) +
                  " (gap " + fmt(gap, 3) + " = " + fmt(gap / sigma, 3) +
                  " sigma); subtracted at convergence " + fmt(last.ef_subtracted));
}

TEST_CASE("criterion 6: coarse-graining and component-splitting inequality suites") {
  Criterion crit(6, "1000-trial entropy inequality property suites");
  Substream rng(2718);
  int cg_h = 0, cg_mi = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix m = testkit::random_distribution(8, rng);
    std::vector<Rect> blocks;
    testkit::random_quadtree_blocks(0, 0, 8, rng, blocks);
    const Matrix g = coarse_grain(m, blocks);
    if (conditional_entropy(g) < conditional_entropy(m) - 1e-12) ++cg_h;
    if (mutual_information(g) > mutual_information(m) + 1e-12) ++cg_mi;
  }

  Substream rng2(1618);
  int split_viol = 0;
  double worst_product_gap = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor4 t(3, 3, 3, 3);
    double total = 0.0;
    for (double& v : t.data()) {
      v = 0.01 + rng2.next_double();
      total += v;
    }
    for (double& v : t.data()) v /= total;
    const auto [lhs, rhs] = component_split_check(t);
    if (lhs > rhs + 1e-12) ++split_viol;

    const Matrix mx = testkit::random_distribution(3, rng2);
    const Matrix my = testkit::random_distribution(3, rng2);
    Tensor4 sep(3, 3, 3, 3);
    for (int xa = 0; xa < 3; ++xa)
      for (int ya = 0; ya < 3; ++ya)
        for (int xb = 0; xb < 3; ++xb)
          for (int yb = 0; yb < 3; ++yb) sep.at(xa, ya, xb, yb) = mx(xa, xb) * my(ya, yb);
    const auto [slhs, srhs] = component_split_check(sep);
    worst_product_gap = std::max(worst_product_gap, std::abs(slhs - srhs));
  }
  const bool pass = cg_h == 0 && cg_mi == 0 && split_viol == 0 && worst_product_gap <= 1e-12;
  crit.report(pass, "coarse-grain H violations " + std::to_string(cg_h) + ", MI violations " +
                        std::to_string(cg_mi) + ", splitting violations " +
                        std::to_string(split_viol) + ", worst product-equality gap " +
                        fmt(worst_product_gap, 2));
}

TEST_CASE("criterion 7: Monte Carlo and propagation analyses agree") {
  Criterion crit(7, "MC sigma within 4x of propagation; partials at 1e-6");
  ExperimentConfig cfg = parse(
      "grid.n = 64\n"
      "detector.singles_rate_a = 1.0e6\n"
      "detector.singles_rate_b = 1.0e6\n"
      "sampler.iterative_passes = 32\n"
      "analysis.mc_trials = 100\n"
      "run.seed = 71\n");
  const SimulationResult result = run_simulation(cfg);
  REQUIRE(result.raw.has_value());
  const double prop_sigma = result.raw->propagation.ef_sigma;
  const double mc_sigma = result.raw->monte_carlo.ef_sigma;
  const double ratio = mc_sigma / prop_sigma;
  const bool agree = ratio > 0.25 && ratio < 4.0;

  // finite-difference validation of the analytic partials on the run's own
  // estimates, Richardson-extrapolated central differences at 1e-3 relative
  const std::vector<EstimatedDistribution>& ests = result.estimates_raw;
  double worst_rel = 0.0;
  int checked = 0;
  for (std::size_t t = 0; t < kTreeCount; ++t) {
    for (std::size_t i = 0; i < ests[t].leaves.size() && checked < 40; i += 7) {
      if (ests[t].leaves[i].pooled_c < 50.0) continue;
      auto shifted = [&](double dc) {
        std::vector<EstimatedDistribution> work = ests;
        work[t].leaves[i].pooled_c += dc;
        for (LeafEstimate& leaf : work[t].leaves)
          leaf.rate = leaf.pooled_c / (leaf.efficiency * leaf.total_time);
        work[t].matrix = rebuild_matrix(work[t].leaves, work[t].grid.n);
        return ef_of(work, false);
      };
      const double dc = 1e-3 * ests[t].leaves[i].pooled_c;
      const double coarse = (shifted(dc) - shifted(-dc)) / (2.0 * dc);
      const double fine = (shifted(0.5 * dc) - shifted(-0.5 * dc)) / dc;
      const double fd = (4.0 * fine - coarse) / 3.0;
      const double analytic = result.raw->propagation.sensitivity[t][i];
      worst_rel = std::max(worst_rel, std::abs(analytic - fd) / std::abs(fd));
      ++checked;
    }
  }
  const bool partials_ok = checked >= 20 && worst_rel <= 1e-6;
  crit.report(agree && partials_ok,
              "sigma MC " + fmt(mc_sigma, 3) + " vs propagation " + fmt(prop_sigma, 3) +
                  " (ratio " + fmt(ratio, 3) + "); " + std::to_string(checked) +
                  " partials checked, worst relative deviation " + fmt(worst_rel, 2));
}

TEST_CASE("criterion 8: identical config and seed reproduce byte-identical leaf CSVs") {
  Criterion crit(8, "deterministic outputs");
  const fs::path dir = fs::temp_directory_path() / "quadwit_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path config = dir / "exp.conf";
  {
    std::ofstream out(config);
    out << "grid.n = 32\n"
           "detector.singles_rate_a = 5.0e5\n"
           "detector.singles_rate_b = 5.0e5\n"
           "sampler.iterative_passes = 4\n"
           "analysis.mc_trials = 8\n"
           "run.seed = 4242\n";
  }
  RunOptions opts;
  opts.quiet = true;
  opts.out_dir = (dir / "a").string();
  const int rc1 = cmd_simulate(config.string(), opts);
  opts.out_dir = (dir / "b").string();
  const int rc2 = cmd_simulate(config.string(), opts);

  bool identical = rc1 == 0 && rc2 == 0;
  for (std::size_t i = 0; i < kTreeCount && identical; ++i) {
    const std::string name = "leaves_" + std::string(tree_name(i)) + ".csv";
    identical = !slurp(dir / "a" / name).empty() &&
                slurp(dir / "a" / name) == slurp(dir / "b" / name);
  }
  crit.report(identical, "two runs, four leaf CSVs each, byte-compared");
  fs::remove_all(dir);
}
