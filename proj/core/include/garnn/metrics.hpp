#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace garnn {

double rmse(std::span<const double> y, std::span<const double> y_hat);
double mae(std::span<const double> y, std::span<const double> y_hat);
/// Percent; every y must be > 0 (glucose always is).
double mape(std::span<const double> y, std::span<const double> y_hat);

/// Piecewise penalty for the glucose-specific RMSE: w_hypo when the truth
/// is below the hypo threshold and the prediction overestimates, w_hyper
/// when above the hyper threshold and the prediction underestimates, 1
/// otherwise. Weights below 1 are rejected (the penalty may not reward
/// dangerous errors).
struct GrmsePenalty {
  double w_hypo = 2.5;
  double w_hyper = 2.5;
  double hypo_threshold = 70.0;   // mg/dL
  double hyper_threshold = 180.0; // mg/dL
};

double g_rmse(std::span<const double> y, std::span<const double> y_hat,
              const GrmsePenalty& penalty = {});

struct TimeLagResult {
  double minutes = 0.0;
  std::size_t shift = 0;
  bool degenerate = false;  // correlation undefined at every shift
};

/// lag = dt * argmax over shifts in {0..max_shift} of the signed Pearson
/// correlation between y_hat[t] and y[t - shift]; ties break toward the
/// smaller shift. Constant series make the correlation undefined: such
/// shifts are skipped, and if none remain the lag is 0 with the
/// degenerate flag set.
TimeLagResult time_lag(std::span<const double> y,
                       std::span<const double> y_hat, double dt_minutes,
                       std::size_t max_shift);

struct RunMetrics {
  std::string participant;
  std::uint64_t seed = 0;
  double rmse = 0.0;
  double mape = 0.0;
  double mae = 0.0;
  double g_rmse = 0.0;
  double time_lag_minutes = 0.0;
  bool lag_degenerate = false;
};

struct PooledValue {
  double mean = 0.0;
  double sd_seeds = 0.0;         // sd_1: sample sd over per-seed means
  double sd_participants = 0.0;  // sd_2: sample sd over per-participant means
};

struct MetricReport {
  std::vector<RunMetrics> runs;
  PooledValue rmse, mape, mae, g_rmse, time_lag;
};

MetricReport pool_metrics(std::vector<RunMetrics> runs);

/// Text table with each pooled metric as "mean±sd_1(sd_2)".
std::string format_report(const MetricReport& report);
void write_report_csv(const MetricReport& report, const std::string& path);

}  // namespace garnn
