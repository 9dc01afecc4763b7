#include "garnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "garnn/error.hpp"

namespace garnn {

namespace {

void check_pair(std::span<const double> y, std::span<const double> y_hat,
                const char* name) {
  if (y.empty()) {
    fail(ErrorCode::invalid_argument, std::string(name) + ": empty input");
  }
  if (y.size() != y_hat.size()) {
    fail(ErrorCode::invalid_argument,
         std::string(name) + ": got " + std::to_string(y.size()) +
             " targets and " + std::to_string(y_hat.size()) + " predictions");
  }
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double mean_of(std::span<const double> values) {
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

}  // namespace

double rmse(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y, y_hat, "rmse");
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y_hat[i] - y[i];
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y, y_hat, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::abs(y_hat[i] - y[i]);
  return s / static_cast<double>(y.size());
}

double mape(std::span<const double> y, std::span<const double> y_hat) {
  check_pair(y, y_hat, "mape");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!(y[i] > 0.0)) {
      fail(ErrorCode::invalid_argument,
           "mape requires positive targets, got " + std::to_string(y[i]) +
               " at index " + std::to_string(i));
    }
    s += std::abs(y_hat[i] - y[i]) / y[i];
  }
  return 100.0 * s / static_cast<double>(y.size());
}

double g_rmse(std::span<const double> y, std::span<const double> y_hat,
              const GrmsePenalty& penalty) {
  check_pair(y, y_hat, "g_rmse");
  if (penalty.w_hypo < 1.0 || penalty.w_hyper < 1.0) {
    fail(ErrorCode::invalid_argument, "g_rmse penalty weights must be >= 1");
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double p = 1.0;
    if (y[i] < penalty.hypo_threshold && y_hat[i] > y[i]) {
      p = penalty.w_hypo;
    } else if (y[i] > penalty.hyper_threshold && y_hat[i] < y[i]) {
      p = penalty.w_hyper;
    }
    const double r = y_hat[i] - y[i];
    ss += p * r * r;
  }
  return std::sqrt(ss / static_cast<double>(y.size()));
}

TimeLagResult time_lag(std::span<const double> y,
                       std::span<const double> y_hat, double dt_minutes,
                       std::size_t max_shift) {
  check_pair(y, y_hat, "time_lag");
  if (y.size() <= max_shift + 2) {
    fail(ErrorCode::invalid_argument,
         "time_lag needs series length > max_shift + 2");
  }

  TimeLagResult result;
  double best_corr = -std::numeric_limits<double>::infinity();
  bool any_defined = false;

  for (std::size_t shift = 0; shift <= max_shift; ++shift) {
    const std::size_t n = y.size() - shift;
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t t = shift; t < y.size(); ++t) {
      mean_a += y_hat[t];
      mean_b += y[t - shift];
    }
    mean_a /= static_cast<double>(n);
    mean_b /= static_cast<double>(n);
    double cov = 0.0, var_a = 0.0, var_b = 0.0;
    for (std::size_t t = shift; t < y.size(); ++t) {
      const double da = y_hat[t] - mean_a;
      const double db = y[t - shift] - mean_b;
      cov += da * db;
      var_a += da * da;
      var_b += db * db;
    }
    if (var_a == 0.0 || var_b == 0.0) continue;  // undefined at this shift
    const double corr = cov / std::sqrt(var_a * var_b);
    any_defined = true;
    if (corr > best_corr) {
      best_corr = corr;
      result.shift = shift;
    }
  }

  if (!any_defined) {
    result.degenerate = true;
    result.shift = 0;
  }
  result.minutes = dt_minutes * static_cast<double>(result.shift);
  return result;
}

// ---------------------------------------------------------------------------
// Pooled report
// ---------------------------------------------------------------------------

namespace {

PooledValue pool_field(const std::vector<RunMetrics>& runs,
                       double RunMetrics::*field) {
  // Per-seed value = mean over participants; per-participant value = mean
  // over seeds.
  std::map<std::uint64_t, std::vector<double>> by_seed;
  std::map<std::string, std::vector<double>> by_participant;
  for (const auto& run : runs) {
    by_seed[run.seed].push_back(run.*field);
    by_participant[run.participant].push_back(run.*field);
  }
  std::vector<double> seed_means;
  for (const auto& [seed, values] : by_seed) seed_means.push_back(mean_of(values));
  std::vector<double> participant_means;
  for (const auto& [p, values] : by_participant) {
    participant_means.push_back(mean_of(values));
  }
  PooledValue out;
  out.mean = mean_of(seed_means);
  out.sd_seeds = sample_sd(seed_means);
  out.sd_participants = sample_sd(participant_means);
  return out;
}

std::string fmt_pooled(const PooledValue& v) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.2f±%.2f(%.2f)", v.mean, v.sd_seeds,
                v.sd_participants);
  return buf;
}

}  // namespace

MetricReport pool_metrics(std::vector<RunMetrics> runs) {
  if (runs.empty()) {
    fail(ErrorCode::invalid_argument, "pool_metrics needs at least one run");
  }
  MetricReport report;
  report.rmse = pool_field(runs, &RunMetrics::rmse);
  report.mape = pool_field(runs, &RunMetrics::mape);
  report.mae = pool_field(runs, &RunMetrics::mae);
  report.g_rmse = pool_field(runs, &RunMetrics::g_rmse);
  report.time_lag = pool_field(runs, &RunMetrics::time_lag_minutes);
  report.runs = std::move(runs);
  return report;
}

std::string format_report(const MetricReport& report) {
  std::ostringstream out;
  out << "metric          pooled mean±sd_seeds(sd_participants)\n";
  out << "RMSE (mg/dL)    " << fmt_pooled(report.rmse) << '\n';
  out << "MAPE (%)        " << fmt_pooled(report.mape) << '\n';
  out << "MAE (mg/dL)     " << fmt_pooled(report.mae) << '\n';
  out << "gRMSE (mg/dL)   " << fmt_pooled(report.g_rmse) << '\n';
  out << "Time lag (min)  " << fmt_pooled(report.time_lag) << '\n';
  return out.str();
}

void write_report_csv(const MetricReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << "participant,seed,rmse,mape,mae,g_rmse,time_lag_minutes,lag_degenerate\n";
  char buf[256];
  for (const auto& run : report.runs) {
    std::snprintf(buf, sizeof(buf), "%s,%llu,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n",
                  run.participant.c_str(),
                  static_cast<unsigned long long>(run.seed), run.rmse, run.mape,
                  run.mae, run.g_rmse, run.time_lag_minutes,
                  run.lag_degenerate ? 1 : 0);
    out << buf;
  }
  const auto pooled_row = [&](const char* name, const PooledValue& v) {
    std::snprintf(buf, sizeof(buf), "pooled_%s,,%.10g,%.10g,%.10g,,,\n", name,
                  v.mean, v.sd_seeds, v.sd_participants);
    out << buf;
  };
  pooled_row("rmse", report.rmse);
  pooled_row("mape", report.mape);
  pooled_row("mae", report.mae);
  pooled_row("g_rmse", report.g_rmse);
  pooled_row("time_lag", report.time_lag);
}

}  // namespace garnn
