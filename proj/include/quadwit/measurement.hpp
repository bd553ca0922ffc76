#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "quadwit/grid.hpp"
#include "quadwit/joint_model.hpp"
#include "quadwit/rng.hpp"

namespace quadwit {

enum class EfficiencyModel { Uniform, SmoothField };
enum class NoiseModel { Poisson, None };

/// Coincidence-counting apparatus parameters. `accidental_offset` documents
/// the displaced accidental window; the flat-background model itself only
/// needs the window width.
struct DetectorConfig {
  double acquisition_time = 0.5;      // s, T_a per node sample
  double coincidence_window = 1e-9;   // s
  double accidental_offset = 2e-9;    // s, documentation only
  double singles_rate_a = 0.0;        // events/s
  double singles_rate_b = 0.0;        // events/s
  EfficiencyModel efficiency_model = EfficiencyModel::Uniform;
  NoiseModel noise = NoiseModel::Poisson;
  std::uint64_t rng_seed = 1;

  void validate() const {
    if (!(acquisition_time > 0.0))
      throw std::invalid_argument("DetectorConfig: acquisition_time must be positive");
    if (!(coincidence_window > 0.0))
      throw std::invalid_argument("DetectorConfig: coincidence_window must be positive");
    if (singles_rate_a < 0.0 || singles_rate_b < 0.0)
      throw std::invalid_argument("DetectorConfig: singles rates must be non-negative");
  }
};

/// One acquisition of one node. Counts are doubles so the noise-free mode can
/// carry exact expectations through the same pipeline.
struct MeasurementRecord {
  double coincidences = 0.0;  // C_i, accidentals included
  double accidentals = 0.0;   // A_i from the displaced window
  double efficiency = 1.0;    // epsilon_i in (0, 1]
  double duration = 0.0;      // s
};

struct ExpectedRates {
  double coincidence = 0.0;  // true pairs, events/s
  double accidental = 0.0;   // flat background, events/s
};

/// Expected true-coincidence and accidental rates for a rectangle.
/// Accidentals enter as an independent Poisson stream at S_a * S_b * tau,
/// with each party's singles restricted to its marginal interval.
inline ExpectedRates expected_rates(const JointModel& model, double total_rate, const Rect& rect,
                                    const DetectorConfig& det) {
  const int n = model.grid_size();
  if (!rect.within(n)) throw std::domain_error("expected_rates: rectangle outside grid bounds");
  ExpectedRates r;
  r.coincidence = total_rate * model.region_mass(rect);
  const double sa = det.singles_rate_a * model.marginal_mass_a(rect.row, rect.row_end());
  const double sb = det.singles_rate_b * model.marginal_mass_b(rect.col, rect.col_end());
  r.accidental = sa * sb * det.coincidence_window;
  return r;
}

/// Convenience overload for the Gaussian source.
inline ExpectedRates expected_rates(const SourceModel& src, Basis basis, Component comp,
                                    const Rect& rect, const GridSpec& grid,
                                    const DetectorConfig& det) {
  GaussianJointModel model(src, basis, comp, grid);
  return expected_rates(model, src.total_rate, rect, det);
}

/// Relative coupling efficiency for a node rectangle. The smooth-field model
/// is a seeded sum of two plane-wave sine terms in the rectangle center,
/// confined to [0.8, 1.0].
inline double relative_efficiency(const DetectorConfig& det, const Rect& rect, int grid_n) {
  if (det.efficiency_model == EfficiencyModel::Uniform) return 1.0;
  Substream s(derive_key(det.rng_seed, 0x0effu));
  const double f1 = 0.5 + 1.5 * s.next_double();
  const double f2 = 0.5 + 1.5 * s.next_double();
  const double f3 = 0.5 + 1.5 * s.next_double();
  const double f4 = 0.5 + 1.5 * s.next_double();
  const double p1 = 2.0 * M_PI * s.next_double();
  const double p2 = 2.0 * M_PI * s.next_double();
  const double u = (rect.row + 0.5 * rect.rows) / grid_n;
  const double v = (rect.col + 0.5 * rect.cols) / grid_n;
  return 0.9 + 0.05 * (std::sin(2.0 * M_PI * (f1 * u + f2 * v) + p1) +
                       std::sin(2.0 * M_PI * (f3 * u - f4 * v) + p2));
}

/// Samples one record for a node. Draws are deterministic in
/// (rng_seed, tree_key, node_key, pass_index) regardless of call order.
inline MeasurementRecord acquire(const ExpectedRates& rates, const DetectorConfig& det,
                                 double efficiency, std::uint64_t tree_key,
                                 std::uint64_t node_key, std::uint64_t pass_index,
                                 double duration = 0.0) {
  if (rates.coincidence < 0.0 || rates.accidental < 0.0)
    throw std::invalid_argument("acquire: rates must be non-negative");
  MeasurementRecord rec;
  rec.efficiency = efficiency;
  rec.duration = duration > 0.0 ? duration : det.acquisition_time;
  const double mean_c = efficiency * (rates.coincidence + rates.accidental) * rec.duration;
  const double mean_a = efficiency * rates.accidental * rec.duration;
  if (det.noise == NoiseModel::None) {
    rec.coincidences = mean_c;
    rec.accidentals = mean_a;
    return rec;
  }
  const std::uint64_t base =
      derive_key(derive_key(derive_key(det.rng_seed, tree_key), node_key), pass_index);
  Substream sc(derive_key(base, 0));
  Substream sa(derive_key(base, 1));
  rec.coincidences = static_cast<double>(poisson_draw(mean_c, sc));
  rec.accidentals = static_cast<double>(poisson_draw(mean_a, sa));
  return rec;
}

}  // namespace quadwit
