#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "quadwit/config.hpp"
#include "quadwit/io.hpp"
#include "test_helpers.hpp"

using namespace quadwit;

TEST_CASE("empty config yields the documented defaults") {
  std::istringstream in("");
  const ExperimentConfig cfg = parse_config(in);
  CHECK(cfg.sampler.alpha == 0.002);
  CHECK(cfg.sampler.beta == 2.0);
  CHECK(cfg.sampler.gamma_frac == 0.15);
  CHECK(cfg.detector.acquisition_time == 0.5);
  CHECK(cfg.detector.coincidence_window == 1e-9);
  CHECK(cfg.detector.accidental_offset == 2e-9);
  CHECK(cfg.total_rate == 26400.0);
  CHECK(cfg.grid_n == 512);
  CHECK(cfg.subtract == SubtractMode::Both);
  CHECK(cfg.detector.singles_rate_a == 1.0e6);
  CHECK(cfg.detector.singles_rate_b == 1.0e6);
  // momentum widths default to the pure-state duals
  const SourceModel src = cfg.source();
  CHECK(src.k_sigma_sum_x == Catch::Approx(1.0 / cfg.sigma_sum_x));
  CHECK(src.k_sigma_diff_x == Catch::Approx(1.0 / cfg.sigma_diff_x));
}

TEST_CASE("config values parse with comments and whitespace") {
  std::istringstream in(
      "# experiment\n"
      "source.sigma_sum_x = 2.0e-3   # meters\n"
      "source.sigma_diff_x = 5.0e-5\n"
      "grid.n = 64\n"
      "sampler.alpha = 0.004\n"
      "detector.noise = none\n"
      "detector.efficiency_model = smooth_field\n"
      "analysis.subtract = on\n"
      "run.seed = 777\n"
      "sweep.passes = 1, 2, 4\n");
  const ExperimentConfig cfg = parse_config(in);
  CHECK(cfg.sigma_sum_x == 2.0e-3);
  CHECK(cfg.sigma_diff_x == 5.0e-5);
  CHECK(cfg.grid_n == 64);
  CHECK(cfg.sampler.alpha == 0.004);
  CHECK(cfg.detector.noise == NoiseModel::None);
  CHECK(cfg.detector.efficiency_model == EfficiencyModel::SmoothField);
  CHECK(cfg.subtract == SubtractMode::On);
  CHECK(cfg.seed == 777);
  CHECK(cfg.detector.rng_seed == 777);
  CHECK(cfg.sweep_passes == std::vector<int>{1, 2, 4});
}

TEST_CASE("unknown keys are rejected with the offending line") {
  std::istringstream in("grid.n = 32\nsampler.alhpa = 0.1\n");
  try {
    parse_config(in, "exp.conf");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("exp.conf:2") != std::string::npos);
    CHECK(msg.find("sampler.alhpa") != std::string::npos);
  }
}

TEST_CASE("out-of-range alpha is rejected naming the field") {
  std::istringstream in("sampler.alpha = 1.5\n");
  try {
    parse_config(in, "exp.conf");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("alpha") != std::string::npos);
  }
}

TEST_CASE("malformed lines and duplicates are rejected") {
  std::istringstream bad("grid.n 32\n");
  CHECK_THROWS_AS(parse_config(bad, "f"), ConfigError);
  std::istringstream dup("grid.n = 32\ngrid.n = 64\n");
  CHECK_THROWS_AS(parse_config(dup, "f"), ConfigError);
  std::istringstream number("grid.n = twelve\n");
  CHECK_THROWS_AS(parse_config(number, "f"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/path.conf"), ConfigError);
}

TEST_CASE("format_double round trips doubles exactly") {
  Substream rng(31337);
  for (int i = 0; i < 1000; ++i) {
    const double v = (rng.next_double() - 0.5) * std::exp(40.0 * (rng.next_double() - 0.5));
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("leaf CSV round trips bit-exactly") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "quadwit_io_test";
  fs::create_directories(dir);
  const std::string path = (dir / "leaves.csv").string();

  EstimatedDistribution est;
  est.grid = GridSpec(8, 1.0);
  Substream rng(62);
  for (int q = 0; q < 4; ++q) {
    LeafEstimate leaf;
    leaf.path = q == 0 ? "" : std::string(1, static_cast<char>('0' + q));
    leaf.rect = Rect::square((q >> 1) * 4, (q & 1) * 4, 4);
    leaf.pooled_c = 1000.0 * rng.next_double();
    leaf.pooled_a = 10.0 * rng.next_double();
    leaf.efficiency = 0.8 + 0.2 * rng.next_double();
    leaf.total_time = 3.5;
    est.leaves.push_back(leaf);
  }
  write_leaf_csv(path, "xx", est);
  const std::vector<LeafEstimate> back = read_leaf_csv(path);
  REQUIRE(back.size() == est.leaves.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].path == est.leaves[i].path);
    CHECK(back[i].rect == est.leaves[i].rect);
    CHECK(back[i].pooled_c == est.leaves[i].pooled_c);
    CHECK(back[i].pooled_a == est.leaves[i].pooled_a);
    CHECK(back[i].efficiency == est.leaves[i].efficiency);
    CHECK(back[i].total_time == est.leaves[i].total_time);
  }
  fs::remove_all(dir);
}

TEST_CASE("witness JSON round trips") {
  WitnessResult w;
  w.method = WitnessMethod::AccidentalSubtracted;
  w.uncertainty_method = UncertaintyMethod::Propagation;
  ComponentTerms tx;
  tx.component = Component::X;
  tx.h_position = 1.25;
  tx.h_momentum = 1.5;
  tx.delta_x = 2e-5;
  tx.delta_k = 500.0;
  tx.log_term = std::log2(2.0 * M_PI / (tx.delta_x * tx.delta_k));
  ComponentTerms ty = tx;
  ty.component = Component::Y;
  ty.h_position = 1.1;
  w.components = {tx, ty};
  w.ef_bound = w.recompute();
  w.sigma = 0.042;
  const WitnessResult back = witness_from_json(witness_to_json(w));
  CHECK(back.method == w.method);
  CHECK(back.ef_bound == w.ef_bound);
  CHECK(back.sigma == w.sigma);
  REQUIRE(back.components.size() == 2);
  CHECK(back.components[1].h_position == 1.1);
  CHECK(back.recompute() == w.recompute());
}
