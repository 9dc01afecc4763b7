#pragma once

#include <cstdint>
#include <string>

#include "garnn/data.hpp"

namespace garnn {

/// CGM-style generator with ground-truth event masks. Channels:
/// glucose (target), meal (sparse carbs), bolus (sparse doses following
/// meals), heart_rate (smooth correlated noise), noise (pure distractor),
/// timestamp (minutes-since-midnight / 1440).
///
/// glucose = baseline + circadian sine + sum of meal kernels (positive,
/// gamma-shaped, peak ~45 min, height proportional to carbs) + sum of
/// bolus kernels (negative, peak ~75 min, height proportional to dose)
/// + AR(1) noise, clamped to [clamp_lo, clamp_hi].
struct SyntheticConfig {
  double meals_per_day = 4.0;  // Poisson rate; 0 disables meals and boluses
  double carb_min_g = 20.0;
  double carb_max_g = 80.0;
  double day_start_min = 6 * 60.0;   // meals fall in daytime
  double day_end_min = 22 * 60.0;
  double bolus_prob = 0.7;
  double bolus_delay_max_min = 15.0;
  double bolus_units_per_g = 0.1;

  double meal_peak_min = 45.0;
  double meal_mg_per_g = 0.9;
  double bolus_peak_min = 75.0;
  double bolus_mg_per_unit = 9.0;

  double baseline_mg = 140.0;
  double circadian_amp_mg = 30.0;
  double ar_phi = 0.9;
  double ar_sigma_mg = 3.0;
  double clamp_lo = 40.0;
  double clamp_hi = 400.0;

  double hr_base = 70.0;
  double hr_circadian_amp = 8.0;
  double hr_phi = 0.98;
  double hr_sigma = 1.0;
};

MtsRecord generate_synthetic(std::uint64_t seed, std::size_t days,
                             double dt_minutes,
                             const SyntheticConfig& config = {});

/// Dataset metadata sidecar (JSON): sampling interval, variable names,
/// generator config + seed, split fractions.
void write_dataset_metadata(const MtsRecord& record,
                            const SyntheticConfig& config, std::uint64_t seed,
                            std::size_t days, const SplitSpec& split,
                            const std::string& path);

}  // namespace garnn
