// Acceptance suite: one pass/fail line per criterion, nonzero exit when
// anything fails. Criteria 5-8 share four full-scale training runs on the
// default synthetic dataset (14 days, dt = 5 min, T = 48, H = 6).
//
// The OhioT1DM check is data-gated: it runs only when GARNN_OHIO_DIR
// points at CSVs in this tool's schema (<id>_train.csv / <id>_test.csv
// per participant) and reports SKIP otherwise.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "garnn/checkpoint.hpp"
#include "garnn/data.hpp"
#include "garnn/grad_check.hpp"
#include "garnn/interpret.hpp"
#include "garnn/metrics.hpp"
#include "garnn/model.hpp"
#include "garnn/rng.hpp"
#include "garnn/synthetic.hpp"
#include "garnn/training.hpp"

using namespace garnn;
using Clock = std::chrono::steady_clock;

namespace {

double g_max_softmax_row_error = 0.0;
std::size_t g_softmax_rows_checked = 0;

void fold_softmax_rows(const AttentionTrace& trace) {
  for (const auto& step : trace.steps) {
    for (const auto& att : step) {
      const std::size_t n = att.weights.shape()[0];
      for (std::size_t recv = 0; recv < n; ++recv) {
        double sum = 0.0;
        for (std::size_t send = 0; send < n; ++send) {
          sum += att.weights.at(recv, send);
        }
        g_max_softmax_row_error =
            std::max(g_max_softmax_row_error, std::abs(sum - 1.0));
        ++g_softmax_rows_checked;
      }
    }
  }
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

GarnnModel random_small_model(Rng& rng, AttentionVariant variant,
                              double alpha) {
  GarnnConfig cfg;
  cfg.variant = variant;
  cfg.n_vars = 2 + rng.uniform_index(4);
  cfg.embed_dim = 2 + rng.uniform_index(5);
  cfg.attn_dim = 2 + rng.uniform_index(5);
  cfg.hidden_dim = 4;
  cfg.mlp_hidden = 4;
  cfg.layers = 1 + rng.uniform_index(2);
  cfg.alpha = alpha;
  return GarnnModel::init(cfg, rng.next_u64());
}

MtsWindow random_window_for(Rng& rng, const GarnnModel& model,
                            std::size_t window_len) {
  MtsWindow w;
  std::vector<double> data(model.config.n_vars * window_len);
  for (double& v : data) v = rng.uniform(-1.5, 1.5);
  w.x = Tensor({model.config.n_vars, window_len}, std::move(data));
  return w;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  const auto ranks = [](std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
      i = j + 1;
    }
    return rank;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0 || vb == 0) return 0.0;
  return cov / std::sqrt(va * vb);
}

// ---------------------------------------------------------------------------
// shared full-scale context (criteria 5-8)
// ---------------------------------------------------------------------------

struct TrainedRun {
  std::uint64_t seed;
  GarnnModel model;
  double test_rmse;
  double persistence_rmse;
};

struct FullScaleContext {
  MtsRecord record;
  SplitSpec split;
  Normalizer normalizer;
  MtsRecord train_slice, val_slice, test_slice;
  std::vector<MtsWindow> train_w, val_w, test_w;
  std::vector<double> test_truth;
  std::vector<TrainedRun> runs;              // alpha = 0.2 (criterion 5)
  std::map<double, std::vector<TrainedRun>> alpha_runs;  // criterion 8
  double fit_seconds = 0.0;
};

constexpr std::uint64_t kDatasetSeed = 1000;
constexpr std::size_t kWindowLen = 48;
constexpr std::size_t kHorizon = 6;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4};

TrainConfig full_scale_train_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.lambda = 1e-5;
  cfg.batch_size = 64;
  cfg.max_epochs = 30;
  cfg.patience = 5;
  cfg.seed = seed;
  return cfg;
}

FullScaleContext build_full_scale_context() {
  FullScaleContext ctx;
  ctx.record = generate_synthetic(kDatasetSeed, 14, 5.0);
  const SplitRanges ranges =
      chronological_split(ctx.record.n_steps(), ctx.split);
  ctx.train_slice = slice_record(ctx.record, 0, ranges.train_end);
  ctx.val_slice = slice_record(ctx.record, ranges.train_end, ranges.val_end);
  ctx.test_slice =
      slice_record(ctx.record, ranges.val_end, ctx.record.n_steps());
  ctx.normalizer = Normalizer::fit(ctx.train_slice);
  ctx.train_w = make_windows(ctx.train_slice, ctx.normalizer, kWindowLen, kHorizon);
  ctx.val_w = make_windows(ctx.val_slice, ctx.normalizer, kWindowLen, kHorizon);
  ctx.test_w = make_windows(ctx.test_slice, ctx.normalizer, kWindowLen, kHorizon);
  for (const auto& w : ctx.test_w) {
    ctx.test_truth.push_back(ctx.normalizer.inverse(w.target, 0));
  }
  return ctx;
}

TrainedRun train_one(const FullScaleContext& ctx, std::uint64_t seed,
                     double alpha) {
  GarnnConfig arch;  // defaults: gatv2, E=8, A=8, D=128, L=1, mlp 64
  arch.n_vars = ctx.record.n_vars();
  arch.alpha = alpha;

  const FitResult fit_result = fit(ctx.train_w, ctx.val_w, arch,
                                   full_scale_train_config(seed),
                                   ctx.normalizer);
  TrainedRun run;
  run.seed = seed;
  run.model = fit_result.best_model;
  run.test_rmse =
      rmse(ctx.test_truth, predict_batch(run.model, ctx.test_w, ctx.normalizer));
  run.persistence_rmse =
      rmse(ctx.test_truth, persistence_baseline(ctx.test_w, ctx.normalizer));
  return run;
}

// v^j(I) ranking over the training split, Eq-15 style.
ImportanceRanking ranking_for(const FullScaleContext& ctx,
                              const GarnnModel& model) {
  std::vector<ImportanceMatrix> matrices;
  matrices.reserve(ctx.train_w.size());
  for (const auto& w : ctx.train_w) {
    matrices.push_back(importance_matrix(model, w));
  }
  return dataset_importance(matrices);
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

bool criterion1_gradients(std::string& detail) {
  const auto start = Clock::now();
  Rng rng(71);
  double worst = 0.0;
  bool pass = true;
  for (const auto variant : {AttentionVariant::gat, AttentionVariant::gatv2}) {
    GarnnConfig cfg;
    cfg.variant = variant;
    cfg.n_vars = 3;
    cfg.embed_dim = 3;
    cfg.attn_dim = 3;
    cfg.hidden_dim = 5;
    cfg.mlp_hidden = 4;
    cfg.layers = 2;
    cfg.alpha = 0.2;
    const GarnnModel model = GarnnModel::init(cfg, 7 + rng.next_u64() % 100);
    std::vector<MtsWindow> windows;
    for (int i = 0; i < 2; ++i) {
      MtsWindow w = random_window_for(rng, model, 4);
      w.target = rng.uniform(-1.0, 1.0);
      windows.push_back(std::move(w));
    }
    const auto report = ad::finite_difference_check(
        [&](ad::Tape& tape, std::span<const Tensor> params) {
          GarnnModel probe = model;
          probe.set_parameters(params);
          const BoundModel bound = bind_model(tape, probe, true);
          return objective_on(tape, bound, windows, 1e-4);
        },
        model.parameters(), 1e-5, 1e-4);
    worst = std::max(worst, report.max_rel_err);
    pass = pass && report.pass;
  }
  const double secs = seconds_since(start);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "max rel err %.3e, %.1f s", worst, secs);
  detail = buf;
  return pass && secs < 60.0;
}

bool criterion2_static_ranking(std::string& detail) {
  const auto start = Clock::now();
  Rng rng(72);
  std::size_t checks = 0, failures = 0;
  for (const auto variant : {AttentionVariant::gat, AttentionVariant::gatv2}) {
    for (std::size_t draw = 0; draw < 1000; ++draw) {
      const GarnnModel model = random_small_model(rng, variant, 0.2);
      const MtsWindow w = random_window_for(rng, model, 3);
      const auto fwd = model_forward(model, w, TraceLevel::full);
      fold_softmax_rows(fwd.trace);
      for (std::size_t t = 0; t < fwd.trace.steps.size(); ++t) {
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
          const auto result =
              static_ranking_check(fwd.trace.steps[t][l], model.layers[l]);
          ++checks;
          if (!result.linearized_static || !result.matches_importance) {
            ++failures;
          }
        }
      }
    }
  }
  const double secs = seconds_since(start);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%zu timestep checks over 2x1000 draws, %zu failures, %.1f s",
                checks, failures, secs);
  detail = buf;
  return failures == 0 && secs < 60.0;
}

bool criterion3_gap_bounds(std::string& detail) {
  const auto start = Clock::now();
  Rng rng(73);
  bool pass = true;
  double worst_violation = -1e300;
  double alpha1_gap = 0.0;
  for (const auto variant : {AttentionVariant::gat, AttentionVariant::gatv2}) {
    for (const double alpha : {0.0, 0.2, 0.5, 1.0}) {
      for (std::size_t draw = 0; draw < 500; ++draw) {
        const GarnnModel model = random_small_model(rng, variant, alpha);
        const MtsWindow w = random_window_for(rng, model, 3);
        const auto fwd = model_forward(model, w, TraceLevel::full);
        fold_softmax_rows(fwd.trace);
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
          const GapReport gap = theorem3_gap(fwd.trace, model, l);
          worst_violation = std::max(worst_violation, gap.max_violation);
          pass = pass && gap.within_bound;
          if (variant == AttentionVariant::gat) pass = pass && gap.nonnegative;
          if (alpha == 1.0) {
            alpha1_gap = std::max(alpha1_gap, gap.max_abs_gap);
          }
        }
      }
    }
  }
  pass = pass && alpha1_gap < 1e-12;
  const double secs = seconds_since(start);
  char buf[196];
  std::snprintf(buf, sizeof(buf),
                "max violation %.3e, alpha=1 max gap %.3e, %.1f s",
                worst_violation, alpha1_gap, secs);
  detail = buf;
  return pass && secs < 60.0;
}

bool criterion4_softmax_rows(std::string& detail) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%zu rows, max |sum - 1| = %.3e",
                g_softmax_rows_checked, g_max_softmax_row_error);
  detail = buf;
  return g_softmax_rows_checked > 0 && g_max_softmax_row_error <= 1e-12;
}

bool criterion5_beats_persistence(FullScaleContext& ctx, std::string& detail) {
  const auto start = Clock::now();
  std::size_t beating = 0;
  std::string per_seed;
  for (const std::uint64_t seed : kSeeds) {
    ctx.runs.push_back(train_one(ctx, seed, 0.2));
    const TrainedRun& run = ctx.runs.back();
    const bool beat = run.test_rmse < 0.9 * run.persistence_rmse;
    beating += beat ? 1 : 0;
    char buf[96];
    std::snprintf(buf, sizeof(buf), " seed %llu: %.2f vs %.2f%s",
                  static_cast<unsigned long long>(seed), run.test_rmse,
                  run.persistence_rmse, beat ? "" : " (!)");
    per_seed += buf;

    // fold one traced forward per trained model into the softmax stat
    const auto fwd =
        model_forward(run.model, ctx.test_w.front(), TraceLevel::attention);
    fold_softmax_rows(fwd.trace);
  }
  ctx.fit_seconds = seconds_since(start);
  char buf[64];
  std::snprintf(buf, sizeof(buf), " | %zu/4 beat by 10%%, %.0f s", beating,
                ctx.fit_seconds);
  detail = per_seed + buf;
  return beating >= 3 && ctx.fit_seconds < 30.0 * 60.0;
}

bool criterion6_interpretability(const FullScaleContext& ctx,
                                 std::string& detail) {
  const std::size_t glucose = 0, meal = 1, bolus = 2, noise = 4;
  std::size_t glucose_first = 0, event_brighter = 0;
  bool noise_ok = true;
  std::string notes;

  for (const TrainedRun& run : ctx.runs) {
    // (a) + (c): dataset ranking over the training split
    const ImportanceRanking ranking = ranking_for(ctx, run.model);
    if (ranking.order.front() == glucose) ++glucose_first;
    const auto position = [&](std::size_t var) {
      return std::find(ranking.order.begin(), ranking.order.end(), var) -
             ranking.order.begin();
    };
    if (position(noise) < position(meal) || position(noise) < position(bolus)) {
      noise_ok = false;
    }

    // (b): event vs non-event importance on the held-out test split
    double event_sum[2] = {0, 0}, event_n[2] = {0, 0};
    double rest_sum[2] = {0, 0}, rest_n[2] = {0, 0};
    for (const auto& w : ctx.test_w) {
      const ImportanceMatrix imp = importance_matrix(run.model, w);
      for (int c = 0; c < 2; ++c) {
        const std::size_t var = c == 0 ? meal : bolus;
        const auto* rows = ctx.test_slice.event_rows(var);
        for (std::size_t t = 0; t < kWindowLen; ++t) {
          const std::size_t record_row = w.start_index + t;
          const bool is_event =
              rows && std::binary_search(rows->begin(), rows->end(), record_row);
          const double v = imp.values.at(var, t);
          if (is_event) {
            event_sum[c] += v;
            event_n[c] += 1;
          } else {
            rest_sum[c] += v;
            rest_n[c] += 1;
          }
        }
      }
    }
    const bool meal_bright =
        event_n[0] > 0 && event_sum[0] / event_n[0] > rest_sum[0] / rest_n[0];
    const bool bolus_bright =
        event_n[1] > 0 && event_sum[1] / event_n[1] > rest_sum[1] / rest_n[1];
    if (meal_bright && bolus_bright) ++event_brighter;

    char buf[128];
    std::snprintf(buf, sizeof(buf), " seed %llu: top=%s meal%s bolus%s",
                  static_cast<unsigned long long>(run.seed),
                  ctx.record.variables[ranking.order.front()].c_str(),
                  meal_bright ? "+" : "-", bolus_bright ? "+" : "-");
    notes += buf;
  }

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                " | glucose first %zu/4, events brighter %zu/4, noise ok %d",
                glucose_first, event_brighter, noise_ok ? 1 : 0);
  detail = notes + buf;
  return glucose_first >= 3 && event_brighter >= 3 && noise_ok;
}

bool criterion7_ablation_agreement(const FullScaleContext& ctx,
                                   std::string& detail) {
  // glucose, meal, bolus, heart_rate, noise: the 5 non-timestamp channels
  const std::vector<std::size_t> channels = {0, 1, 2, 3, 4};
  std::size_t agreeing = 0;
  std::string notes;
  for (const TrainedRun& run : ctx.runs) {
    const ImportanceRanking ranking = ranking_for(ctx, run.model);
    std::vector<double> importance, ablation;
    for (const std::size_t j : channels) {
      importance.push_back(ranking.importance[j]);
      ablation.push_back(ablation_oracle(run.model, ctx.test_w, j));
    }
    const double rho = spearman(importance, ablation);
    if (rho > 0.5) ++agreeing;
    char buf[64];
    std::snprintf(buf, sizeof(buf), " seed %llu: rho %.2f",
                  static_cast<unsigned long long>(run.seed), rho);
    notes += buf;
  }
  char buf[48];
  std::snprintf(buf, sizeof(buf), " | %zu/4 above 0.5", agreeing);
  detail = notes + buf;
  return agreeing >= 3;
}

bool criterion8_alpha_stability(FullScaleContext& ctx, std::string& detail) {
  std::string notes;
  bool pass = true;
  for (const double alpha : {0.0, 0.2, 0.5, 1.0}) {
    std::size_t glucose_first = 0;
    if (alpha == 0.2) {
      for (const TrainedRun& run : ctx.runs) {
        if (ranking_for(ctx, run.model).order.front() == 0) ++glucose_first;
      }
    } else {
      auto& runs = ctx.alpha_runs[alpha];
      for (const std::uint64_t seed : kSeeds) {
        runs.push_back(train_one(ctx, seed, alpha));
        if (ranking_for(ctx, runs.back().model).order.front() == 0) {
          ++glucose_first;
        }
      }
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), " alpha %.1f: %zu/4", alpha, glucose_first);
    notes += buf;
    pass = pass && glucose_first >= 3;
  }
  detail = notes;
  return pass;
}

bool criterion9_metric_examples(std::string& detail) {
  bool pass = true;
  const auto close = [&](double got, double want) {
    pass = pass && std::abs(got - want) <= 1e-9;
  };

  const std::vector<double> y1 = {1, 2}, p1 = {1, 4};
  close(rmse(y1, p1), std::sqrt(2.0));
  const std::vector<double> y2 = {100, 200}, p2 = {110, 180};
  close(mape(y2, p2), 10.0);
  close(mae(y2, p2), 15.0);
  close(rmse(y2, y2), 0.0);
  close(mape(y2, y2), 0.0);
  close(mae(y2, y2), 0.0);
  const std::vector<double> hypo_y = {60}, hypo_p = {70};
  close(g_rmse(hypo_y, hypo_p), std::sqrt(250.0));
  const std::vector<double> hyper_y = {200}, hyper_p = {210};
  close(g_rmse(hyper_y, hyper_p), 10.0);
  const std::vector<double> mid_y = {100, 150}, mid_p = {90, 160};
  close(g_rmse(mid_y, mid_p), rmse(mid_y, mid_p));

  Rng rng(79);
  std::size_t dominated = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(20);
    std::vector<double> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform(40.0, 400.0);
      p[i] = y[i] + rng.normal(0.0, 30.0);
    }
    if (g_rmse(y, p) >= rmse(y, p) - 1e-12) ++dominated;
  }
  pass = pass && dominated == 1000;

  std::vector<double> sine(300), lagged(300);
  for (std::size_t t = 0; t < 300; ++t) {
    sine[t] = 140 + 30 * std::sin(2.0 * std::numbers::pi *
                                  static_cast<double>(t) / 288.0);
  }
  for (std::size_t t = 0; t < 300; ++t) {
    lagged[t] = t >= kHorizon ? sine[t - kHorizon] : sine[0];
  }
  const auto lag = time_lag(sine, lagged, 5.0, kHorizon);
  pass = pass && lag.minutes == 5.0 * static_cast<double>(kHorizon);

  char buf[96];
  std::snprintf(buf, sizeof(buf),
                "examples exact, g_rmse>=rmse %zu/1000, lag %.0f min",
                dominated, lag.minutes);
  detail = buf;
  return pass;
}

// Criterion 10 (gated): OhioT1DM-format data, paper protocol.
bool criterion10_ohio(std::string& detail, bool& skipped) {
  const char* dir = std::getenv("GARNN_OHIO_DIR");
  if (dir == nullptr || std::string(dir).empty()) {
    skipped = true;
    detail = "GARNN_OHIO_DIR not set; dataset is access-restricted";
    return true;
  }
  skipped = false;

  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, std::string>> participants;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string path = entry.path().string();
    const std::string name = entry.path().filename().string();
    const auto pos = name.find("_train.csv");
    if (pos == std::string::npos) continue;
    const std::string test_path =
        (fs::path(dir) / (name.substr(0, pos) + "_test.csv")).string();
    if (fs::exists(test_path)) participants.emplace_back(path, test_path);
  }
  if (participants.empty()) {
    detail = "no <id>_train.csv/<id>_test.csv pairs under GARNN_OHIO_DIR";
    return false;
  }

  // Paper protocol: grid over learning rate and lambda, 4 seeds, model
  // selection on validation RMSE, pooled test RMSE.
  const std::vector<double> lr_grid = {1e-3, 1e-4, 1e-5};
  const std::vector<double> lambda_grid = {1e-4, 1e-5, 1e-6};
  std::vector<RunMetrics> runs;
  for (const auto& [train_path, test_path] : participants) {
    const MtsRecord raw_train = encode_timestamp(load_csv(train_path));
    const MtsRecord raw_test = encode_timestamp(load_csv(test_path));
    const std::size_t train_end =
        static_cast<std::size_t>(0.8 * static_cast<double>(raw_train.n_steps()));
    const MtsRecord train_slice = slice_record(raw_train, 0, train_end);
    const MtsRecord val_slice =
        slice_record(raw_train, train_end, raw_train.n_steps());
    const Normalizer norm = Normalizer::fit(train_slice);
    const auto train_w = make_windows(train_slice, norm, kWindowLen, kHorizon);
    const auto val_w = make_windows(val_slice, norm, kWindowLen, kHorizon);
    const auto test_w = make_windows(raw_test, norm, kWindowLen, kHorizon);
    std::vector<double> truth;
    for (const auto& w : test_w) truth.push_back(norm.inverse(w.target, 0));

    for (const std::uint64_t seed : kSeeds) {
      double best_val = std::numeric_limits<double>::infinity();
      GarnnModel best_model;
      for (const double lr : lr_grid) {
        for (const double lambda : lambda_grid) {
          GarnnConfig arch;
          arch.n_vars = raw_train.n_vars();
          TrainConfig cfg = full_scale_train_config(seed);
          cfg.learning_rate = lr;
          cfg.lambda = lambda;
          const FitResult result = fit(train_w, val_w, arch, cfg, norm);
          const double val =
              result.curve[result.best_epoch - 1].val_rmse;
          if (val < best_val) {
            best_val = val;
            best_model = result.best_model;
          }
        }
      }
      RunMetrics run;
      run.participant = raw_train.participant;
      run.seed = seed;
      run.rmse = rmse(truth, predict_batch(best_model, test_w, norm));
      runs.push_back(run);
      std::printf("  ohio %s seed %llu: test rmse %.2f\n",
                  run.participant.c_str(),
                  static_cast<unsigned long long>(seed), run.rmse);
    }
  }
  const MetricReport report = pool_metrics(runs);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "pooled rmse %.2f vs 18.97 (+-10%%)",
                report.rmse.mean);
  detail = buf;
  return std::abs(report.rmse.mean - 18.97) <= 0.1 * 18.97;
}

}  // namespace

int main() {
  std::printf("garnn acceptance suite\n");
  int failures = 0;
  const auto report = [&](int id, const char* name, bool pass,
                          const std::string& detail) {
    std::printf("[%s] C%d %s: %s\n", pass ? "PASS" : "FAIL", id, name,
                detail.c_str());
    if (!pass) ++failures;
    std::fflush(stdout);
  };

  std::string detail;

  report(1, "gradient correctness", criterion1_gradients(detail), detail);
  report(2, "theorem 2 static ranking", criterion2_static_ranking(detail), detail);
  report(3, "theorem 3 gap bounds", criterion3_gap_bounds(detail), detail);

  FullScaleContext ctx = build_full_scale_context();
  report(5, "beats persistence", criterion5_beats_persistence(ctx, detail), detail);
  report(6, "interpretability fidelity", criterion6_interpretability(ctx, detail), detail);
  report(7, "ablation oracle agreement", criterion7_ablation_agreement(ctx, detail), detail);
  report(8, "alpha stability", criterion8_alpha_stability(ctx, detail), detail);

  // softmax rows folded in throughout the traced passes above
  report(4, "softmax attention rows", criterion4_softmax_rows(detail), detail);
  report(9, "metrics unit suite", criterion9_metric_examples(detail), detail);

  bool skipped = false;
  const bool ohio = criterion10_ohio(detail, skipped);
  if (skipped) {
    std::printf("[SKIP] C10 ohio t1dm reproduction: %s\n", detail.c_str());
  } else {
    report(10, "ohio t1dm reproduction", ohio, detail);
  }

  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
