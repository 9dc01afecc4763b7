#include "garnn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "garnn/error.hpp"
#include "garnn/rng.hpp"

namespace garnn {

namespace {

constexpr double kMinutesPerDay = 24.0 * 60.0;

// Knuth's Poisson sampler; fine for small rates and fully deterministic
// given the stream.
std::size_t poisson(Rng& rng, double rate) {
  if (rate <= 0.0) return 0;
  const double limit = std::exp(-rate);
  double p = 1.0;
  std::size_t k = 0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return k - 1;
}

// Gamma-like absorption kernel: unit height at `peak` minutes after onset.
double kernel(double minutes_since, double peak) {
  if (minutes_since < 0.0) return 0.0;
  const double u = minutes_since / peak;
  return u * std::exp(1.0 - u);
}

struct Impulse {
  std::size_t step;
  double magnitude;  // carbs (g) or dose (U)
};

}  // namespace

MtsRecord generate_synthetic(std::uint64_t seed, std::size_t days,
                             double dt_minutes,
                             const SyntheticConfig& config) {
  if (days == 0) fail(ErrorCode::invalid_argument, "generator needs days >= 1");
  if (!(dt_minutes > 0.0)) {
    fail(ErrorCode::invalid_argument, "sampling interval must be > 0");
  }

  const auto steps_per_day =
      static_cast<std::size_t>(std::llround(kMinutesPerDay / dt_minutes));
  const std::size_t n_steps = steps_per_day * days;

  Rng root(seed);
  Rng rng_events = root.fork(1);
  Rng rng_glucose = root.fork(2);
  Rng rng_hr = root.fork(3);
  Rng rng_noise = root.fork(4);

  // Meal and bolus event schedules, day by day.
  std::vector<Impulse> meals;
  std::vector<Impulse> boluses;
  for (std::size_t day = 0; day < days; ++day) {
    const std::size_t count = poisson(rng_events, config.meals_per_day);
    for (std::size_t m = 0; m < count; ++m) {
      const double minute =
          rng_events.uniform(config.day_start_min, config.day_end_min);
      const double carbs = rng_events.uniform(config.carb_min_g, config.carb_max_g);
      const auto step = static_cast<std::size_t>(
          (static_cast<double>(day) * kMinutesPerDay + minute) / dt_minutes);
      if (step >= n_steps) continue;
      meals.push_back({step, carbs});

      if (rng_events.uniform() < config.bolus_prob) {
        const double delay = rng_events.uniform(0.0, config.bolus_delay_max_min);
        const auto bolus_step = static_cast<std::size_t>(
            (static_cast<double>(day) * kMinutesPerDay + minute + delay) /
            dt_minutes);
        if (bolus_step >= n_steps) continue;
        const double dose =
            carbs * config.bolus_units_per_g * rng_events.uniform(0.9, 1.1);
        boluses.push_back({bolus_step, dose});
      }
    }
  }
  const auto by_step = [](const Impulse& a, const Impulse& b) {
    return a.step < b.step;
  };
  std::stable_sort(meals.begin(), meals.end(), by_step);
  std::stable_sort(boluses.begin(), boluses.end(), by_step);
  // Collapse events landing on the same step (kernel magnitudes add).
  const auto collapse = [](std::vector<Impulse>& events) {
    std::vector<Impulse> out;
    for (const auto& e : events) {
      if (!out.empty() && out.back().step == e.step) {
        out.back().magnitude += e.magnitude;
      } else {
        out.push_back(e);
      }
    }
    events = std::move(out);
  };
  collapse(meals);
  collapse(boluses);

  // AR(1) noise streams with stationary starts.
  const auto ar_series = [n_steps](Rng& rng, double phi, double sigma) {
    std::vector<double> out(n_steps);
    const double stationary_sd =
        sigma / std::sqrt(std::max(1.0 - phi * phi, 1e-12));
    out[0] = rng.normal(0.0, stationary_sd);
    for (std::size_t t = 1; t < n_steps; ++t) {
      out[t] = phi * out[t - 1] + rng.normal(0.0, sigma);
    }
    return out;
  };
  const std::vector<double> glucose_ar =
      ar_series(rng_glucose, config.ar_phi, config.ar_sigma_mg);
  const std::vector<double> hr_ar =
      ar_series(rng_hr, config.hr_phi, config.hr_sigma);

  MtsRecord record;
  record.participant = "synthetic-" + std::to_string(seed);
  record.dt_minutes = dt_minutes;
  record.wallclock = true;
  record.variables = {"glucose", "meal",  "bolus",
                      "heart_rate", "noise", "timestamp"};
  const std::size_t n_vars = record.variables.size();
  record.timestamps.resize(n_steps);
  record.values.assign(n_steps * n_vars, std::numeric_limits<double>::quiet_NaN());

  EventMask meal_mask{1, {}};
  EventMask bolus_mask{2, {}};
  for (const auto& m : meals) meal_mask.rows.push_back(m.step);
  for (const auto& b : boluses) bolus_mask.rows.push_back(b.step);

  for (std::size_t t = 0; t < n_steps; ++t) {
    const double minute = static_cast<double>(t) * dt_minutes;
    record.timestamps[t] = static_cast<std::int64_t>(std::llround(minute));

    double glucose = config.baseline_mg +
                     config.circadian_amp_mg *
                         std::sin(2.0 * std::numbers::pi * minute / kMinutesPerDay) +
                     glucose_ar[t];
    for (const auto& m : meals) {
      const double since = minute - static_cast<double>(m.step) * dt_minutes;
      if (since < 0.0) break;
      glucose += m.magnitude * config.meal_mg_per_g *
                 kernel(since, config.meal_peak_min);
    }
    for (const auto& b : boluses) {
      const double since = minute - static_cast<double>(b.step) * dt_minutes;
      if (since < 0.0) break;
      glucose -= b.magnitude * config.bolus_mg_per_unit *
                 kernel(since, config.bolus_peak_min);
    }
    glucose = std::clamp(glucose, config.clamp_lo, config.clamp_hi);

    const double day_minute = std::fmod(minute, kMinutesPerDay);
    const double hr =
        config.hr_base +
        config.hr_circadian_amp *
            std::sin(2.0 * std::numbers::pi * (day_minute - 14.0 * 60.0) /
                     kMinutesPerDay) +
        hr_ar[t];

    record.values[t * n_vars + 0] = glucose;
    record.values[t * n_vars + 3] = hr;
    record.values[t * n_vars + 4] = rng_noise.normal();
    record.values[t * n_vars + 5] = day_minute / kMinutesPerDay;
  }
  for (const auto& m : meals) record.values[m.step * n_vars + 1] = m.magnitude;
  for (const auto& b : boluses) record.values[b.step * n_vars + 2] = b.magnitude;

  if (!meal_mask.rows.empty()) record.events.push_back(std::move(meal_mask));
  if (!bolus_mask.rows.empty()) record.events.push_back(std::move(bolus_mask));
  record.validate();
  return record;
}

void write_dataset_metadata(const MtsRecord& record,
                            const SyntheticConfig& config, std::uint64_t seed,
                            std::size_t days, const SplitSpec& split,
                            const std::string& path) {
  nlohmann::json doc;
  doc["participant"] = record.participant;
  doc["dt_minutes"] = record.dt_minutes;
  doc["variables"] = record.variables;
  doc["n_steps"] = record.n_steps();
  doc["split_fractions"] = {{"train", split.train},
                            {"validation", split.validation},
                            {"test", split.test}};
  doc["generator"] = {
      {"seed", seed},
      {"days", days},
      {"meals_per_day", config.meals_per_day},
      {"carb_min_g", config.carb_min_g},
      {"carb_max_g", config.carb_max_g},
      {"day_start_min", config.day_start_min},
      {"day_end_min", config.day_end_min},
      {"bolus_prob", config.bolus_prob},
      {"bolus_delay_max_min", config.bolus_delay_max_min},
      {"bolus_units_per_g", config.bolus_units_per_g},
      {"meal_peak_min", config.meal_peak_min},
      {"meal_mg_per_g", config.meal_mg_per_g},
      {"bolus_peak_min", config.bolus_peak_min},
      {"bolus_mg_per_unit", config.bolus_mg_per_unit},
      {"baseline_mg", config.baseline_mg},
      {"circadian_amp_mg", config.circadian_amp_mg},
      {"ar_phi", config.ar_phi},
      {"ar_sigma_mg", config.ar_sigma_mg},
      {"clamp_lo", config.clamp_lo},
      {"clamp_hi", config.clamp_hi},
      {"hr_base", config.hr_base},
      {"hr_circadian_amp", config.hr_circadian_amp},
      {"hr_phi", config.hr_phi},
      {"hr_sigma", config.hr_sigma},
  };
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << doc.dump(1) << '\n';
}

}  // namespace garnn
