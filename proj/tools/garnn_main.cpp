// garnn: simulate / train / predict / evaluate / explain / verify-theorems
//
// Every subcommand resolves its configuration from (defaults < --config
// file < --set overrides < dedicated flags), writes its artifacts under
// --out, and finishes with a manifest.json capturing the resolved config,
// the seed, and content hashes of all inputs and artifacts. Feeding that
// manifest back via --config reproduces the run bit for bit.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "garnn/checkpoint.hpp"
#include "garnn/config.hpp"
#include "garnn/data.hpp"
#include "garnn/error.hpp"
#include "garnn/interpret.hpp"
#include "garnn/manifest.hpp"
#include "garnn/metrics.hpp"
#include "garnn/model.hpp"
#include "garnn/rng.hpp"
#include "garnn/svg.hpp"
#include "garnn/synthetic.hpp"
#include "garnn/training.hpp"

namespace fs = std::filesystem;
using namespace garnn;

namespace {

const std::vector<std::string> kKnownKeys = {
    // data pipeline
    "data.days", "data.dt_minutes", "data.window", "data.horizon",
    "data.split_train", "data.split_validation", "data.split_test",
    "data.add_timestamp_channel", "data.events",
    // model architecture
    "model.variant", "model.embed_dim", "model.attn_dim", "model.hidden_dim",
    "model.layers", "model.mlp_hidden", "model.alpha",
    // training (leaf names match the TrainConfig fields)
    "train.learning_rate", "train.lambda", "train.batch_size",
    "train.max_epochs", "train.patience", "train.seed", "train.beta1",
    "train.beta2", "train.epsilon", "train.threads",
    // synthetic generator
    "sim.seed", "sim.meals_per_day", "sim.carb_min_g", "sim.carb_max_g",
    "sim.day_start_min", "sim.day_end_min", "sim.bolus_prob",
    "sim.bolus_delay_max_min", "sim.bolus_units_per_g", "sim.meal_peak_min",
    "sim.meal_mg_per_g", "sim.bolus_peak_min", "sim.bolus_mg_per_unit",
    "sim.baseline_mg", "sim.circadian_amp_mg", "sim.ar_phi", "sim.ar_sigma_mg",
    "sim.clamp_lo", "sim.clamp_hi", "sim.hr_base", "sim.hr_circadian_amp",
    "sim.hr_phi", "sim.hr_sigma",
    // per-command
    "predict.split", "eval.split", "explain.split", "explain.mask_padded",
    "verify.static_draws", "verify.gap_draws", "verify.window",
};

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;  // -1: keep the config/default value
  double alpha = -1.0;
  std::int64_t layers = 0;
  std::string variant;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_model_flags) {
  cmd->add_option("--config", args.config_path,
                  "flat key=value config file, or a manifest.json");
  cmd->add_option("--out", args.out_dir, "output directory")->required();
  cmd->add_option("--set", args.overrides, "override: key=value (repeatable)");
  cmd->add_option("--seed", args.seed, "seed override");
  if (with_model_flags) {
    cmd->add_option("--alpha", args.alpha, "LeakyReLU slope in [0,1]");
    cmd->add_option("--layers", args.layers, "graph layers (1 or 2)");
    cmd->add_option("--variant", args.variant, "gat or gatv2");
  }
}

KvConfig resolve_config(const CommonArgs& args) {
  KvConfig cfg;
  if (!args.config_path.empty()) cfg = KvConfig::load(args.config_path);
  for (const auto& pair : args.overrides) cfg.set_pair(pair);
  if (args.seed >= 0) {
    cfg.set("train.seed", std::to_string(args.seed));
    cfg.set("sim.seed", std::to_string(args.seed));
  }
  if (args.alpha >= 0.0) cfg.set("model.alpha", std::to_string(args.alpha));
  if (args.layers > 0) cfg.set("model.layers", std::to_string(args.layers));
  if (!args.variant.empty()) cfg.set("model.variant", args.variant);
  cfg.require_known(kKnownKeys);
  return cfg;
}

GarnnConfig model_config(const KvConfig& cfg, std::size_t n_vars) {
  GarnnConfig out;
  out.variant = parse_variant(cfg.get_string("model.variant", "gatv2"));
  out.n_vars = n_vars;
  out.embed_dim = cfg.get_uint("model.embed_dim", 8);
  out.attn_dim = cfg.get_uint("model.attn_dim", 8);
  out.hidden_dim = cfg.get_uint("model.hidden_dim", 128);
  out.layers = cfg.get_uint("model.layers", 1);
  out.mlp_hidden = cfg.get_uint("model.mlp_hidden", 64);
  out.alpha = cfg.get_double("model.alpha", 0.2);
  return out;
}

TrainConfig train_config(const KvConfig& cfg) {
  TrainConfig out;
  out.learning_rate = cfg.get_double("train.learning_rate", 1e-3);
  out.lambda = cfg.get_double("train.lambda", 1e-5);
  out.batch_size = cfg.get_uint("train.batch_size", 64);
  out.max_epochs = cfg.get_uint("train.max_epochs", 30);
  out.patience = cfg.get_uint("train.patience", 5);
  out.seed = cfg.get_uint("train.seed", 1);
  out.beta1 = cfg.get_double("train.beta1", 0.9);
  out.beta2 = cfg.get_double("train.beta2", 0.999);
  out.epsilon = cfg.get_double("train.epsilon", 1e-8);
  out.threads = cfg.get_uint("train.threads", 0);
  return out;
}

SplitSpec split_spec(const KvConfig& cfg) {
  SplitSpec out;
  out.train = cfg.get_double("data.split_train", 0.6);
  out.validation = cfg.get_double("data.split_validation", 0.2);
  out.test = cfg.get_double("data.split_test", 0.2);
  out.validate();
  return out;
}

SyntheticConfig synth_config(const KvConfig& cfg) {
  SyntheticConfig out;
  out.meals_per_day = cfg.get_double("sim.meals_per_day", out.meals_per_day);
  out.carb_min_g = cfg.get_double("sim.carb_min_g", out.carb_min_g);
  out.carb_max_g = cfg.get_double("sim.carb_max_g", out.carb_max_g);
  out.day_start_min = cfg.get_double("sim.day_start_min", out.day_start_min);
  out.day_end_min = cfg.get_double("sim.day_end_min", out.day_end_min);
  out.bolus_prob = cfg.get_double("sim.bolus_prob", out.bolus_prob);
  out.bolus_delay_max_min =
      cfg.get_double("sim.bolus_delay_max_min", out.bolus_delay_max_min);
  out.bolus_units_per_g =
      cfg.get_double("sim.bolus_units_per_g", out.bolus_units_per_g);
  out.meal_peak_min = cfg.get_double("sim.meal_peak_min", out.meal_peak_min);
  out.meal_mg_per_g = cfg.get_double("sim.meal_mg_per_g", out.meal_mg_per_g);
  out.bolus_peak_min = cfg.get_double("sim.bolus_peak_min", out.bolus_peak_min);
  out.bolus_mg_per_unit =
      cfg.get_double("sim.bolus_mg_per_unit", out.bolus_mg_per_unit);
  out.baseline_mg = cfg.get_double("sim.baseline_mg", out.baseline_mg);
  out.circadian_amp_mg =
      cfg.get_double("sim.circadian_amp_mg", out.circadian_amp_mg);
  out.ar_phi = cfg.get_double("sim.ar_phi", out.ar_phi);
  out.ar_sigma_mg = cfg.get_double("sim.ar_sigma_mg", out.ar_sigma_mg);
  out.clamp_lo = cfg.get_double("sim.clamp_lo", out.clamp_lo);
  out.clamp_hi = cfg.get_double("sim.clamp_hi", out.clamp_hi);
  out.hr_base = cfg.get_double("sim.hr_base", out.hr_base);
  out.hr_circadian_amp =
      cfg.get_double("sim.hr_circadian_amp", out.hr_circadian_amp);
  out.hr_phi = cfg.get_double("sim.hr_phi", out.hr_phi);
  out.hr_sigma = cfg.get_double("sim.hr_sigma", out.hr_sigma);
  return out;
}

std::string out_path(const CommonArgs& args, const std::string& name) {
  return (fs::path(args.out_dir) / name).string();
}

void prepare_out_dir(const CommonArgs& args) {
  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create output directory " + args.out_dir);
}

RunManifest make_manifest(const std::string& command, const KvConfig& cfg,
                          std::uint64_t seed) {
  RunManifest manifest;
  manifest.command = command;
  manifest.seed = seed;
  manifest.config = cfg.entries();
  return manifest;
}

struct SplitWindows {
  std::vector<MtsWindow> train, validation, test;
  MtsRecord train_slice, val_slice, test_slice;
  Normalizer normalizer;
};

SplitWindows build_splits(const MtsRecord& record, const SplitSpec& spec,
                          std::size_t window_len, std::size_t horizon,
                          const Normalizer* fixed_normalizer) {
  const SplitRanges ranges = chronological_split(record.n_steps(), spec);
  SplitWindows out;
  out.train_slice = slice_record(record, 0, ranges.train_end);
  out.val_slice = slice_record(record, ranges.train_end, ranges.val_end);
  out.test_slice = slice_record(record, ranges.val_end, record.n_steps());
  out.normalizer =
      fixed_normalizer ? *fixed_normalizer : Normalizer::fit(out.train_slice);
  out.train = make_windows(out.train_slice, out.normalizer, window_len, horizon);
  out.validation = make_windows(out.val_slice, out.normalizer, window_len, horizon);
  out.test = make_windows(out.test_slice, out.normalizer, window_len, horizon);
  return out;
}

MtsRecord load_record(const std::string& path, const KvConfig& cfg) {
  MtsRecord record = load_csv(path);
  const std::string events = cfg.get_string("data.events", "");
  if (!events.empty()) load_events_csv(record, events);
  if (cfg.get_bool("data.add_timestamp_channel", false)) {
    record = encode_timestamp(record);
  }
  return record;
}

// The record's schema must match what the checkpoint was trained on; a
// record lacking only the derived timestamp channel gets it re-derived.
MtsRecord match_schema(MtsRecord record, const CheckpointMeta& meta) {
  if (record.variables != meta.variables) {
    std::vector<std::string> plus = record.variables;
    plus.push_back("timestamp");
    if (plus == meta.variables) {
      record = encode_timestamp(record);
    } else {
      std::string want, got;
      for (const auto& v : meta.variables) want += v + " ";
      for (const auto& v : record.variables) got += v + " ";
      fail(ErrorCode::config, "data columns [" + got +
                                  "] do not match the checkpoint schema [" +
                                  want + "]");
    }
  }
  return record;
}

const std::vector<MtsWindow>& pick_split(const SplitWindows& splits,
                                         const std::string& name) {
  if (name == "train") return splits.train;
  if (name == "validation") return splits.validation;
  if (name == "test") return splits.test;
  fail(ErrorCode::config, "unknown split '" + name + "'");
}

const MtsRecord& pick_slice(const SplitWindows& splits,
                            const std::string& name) {
  if (name == "train") return splits.train_slice;
  if (name == "validation") return splits.val_slice;
  if (name == "test") return splits.test_slice;
  fail(ErrorCode::config, "unknown split '" + name + "'");
}

void write_predictions_csv(const std::string& path, const MtsRecord& slice,
                           std::span<const MtsWindow> windows,
                           std::span<const double> truth,
                           std::span<const double> predictions,
                           std::size_t window_len, std::size_t horizon) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << "timestamp,y,y_hat\n";
  char buf[96];
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const std::size_t target_row =
        windows[i].start_index + window_len + horizon - 1;
    std::snprintf(buf, sizeof(buf), "%lld,%.10g,%.10g\n",
                  static_cast<long long>(slice.timestamps[target_row]),
                  truth[i], predictions[i]);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_simulate(const CommonArgs& args) {
  const KvConfig cfg = resolve_config(args);
  prepare_out_dir(args);

  const std::uint64_t seed = cfg.get_uint("sim.seed", 1);
  const std::size_t days = cfg.get_uint("data.days", 14);
  const double dt = cfg.get_double("data.dt_minutes", 5.0);
  const SyntheticConfig synth = synth_config(cfg);
  const SplitSpec split = split_spec(cfg);

  const MtsRecord record = generate_synthetic(seed, days, dt, synth);
  write_csv(record, out_path(args, "dataset.csv"));
  write_events_csv(record, out_path(args, "events.csv"));
  write_dataset_metadata(record, synth, seed, days, split,
                         out_path(args, "metadata.json"));

  RunManifest manifest = make_manifest("simulate", cfg, seed);
  manifest.add_artifact(out_path(args, "dataset.csv"));
  manifest.add_artifact(out_path(args, "events.csv"));
  manifest.add_artifact(out_path(args, "metadata.json"));
  manifest.write(out_path(args, "manifest.json"));

  std::cout << "simulated " << record.n_steps() << " steps x "
            << record.n_vars() << " variables -> "
            << out_path(args, "dataset.csv") << "\n";
  return 0;
}

int cmd_train(const std::string& data_path, const CommonArgs& args) {
  const KvConfig cfg = resolve_config(args);
  prepare_out_dir(args);

  MtsRecord record = load_record(data_path, cfg);
  const std::size_t window_len = cfg.get_uint("data.window", 48);
  const std::size_t horizon = cfg.get_uint("data.horizon", 6);
  const SplitSpec split = split_spec(cfg);
  const SplitWindows splits =
      build_splits(record, split, window_len, horizon, nullptr);

  const GarnnConfig arch = model_config(cfg, record.n_vars());
  const TrainConfig train_cfg = train_config(cfg);

  std::cout << "training " << variant_name(arch.variant) << " L=" << arch.layers
            << " alpha=" << arch.alpha << " on " << splits.train.size()
            << " windows (val " << splits.validation.size() << ")\n";

  const FitResult result =
      fit(splits.train, splits.validation, arch, train_cfg, splits.normalizer);
  for (const auto& p : result.curve) {
    std::printf("epoch %3zu  train %.6f  val_rmse %.3f%s\n", p.epoch,
                p.train_loss, p.val_rmse,
                p.epoch == result.best_epoch ? "  *" : "");
  }

  CheckpointMeta meta;
  meta.variables = record.variables;
  meta.window_len = window_len;
  meta.horizon = horizon;
  meta.dt_minutes = record.dt_minutes;
  meta.split = split;
  for (std::size_t v = 0; v < record.n_vars(); ++v) {
    meta.norm_means.push_back(splits.normalizer.mean(v));
    meta.norm_stds.push_back(splits.normalizer.stddev(v));
  }
  meta.seed = train_cfg.seed;
  save_checkpoint(result.best_model, meta, out_path(args, "checkpoint.json"));

  {
    std::ofstream curve(out_path(args, "loss_curve.csv"));
    if (!curve) fail(ErrorCode::io, "cannot write loss_curve.csv");
    curve << "epoch,train_loss,val_rmse\n";
    char buf[96];
    for (const auto& p : result.curve) {
      std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g\n", p.epoch,
                    p.train_loss, p.val_rmse);
      curve << buf;
    }
  }

  RunManifest manifest = make_manifest("train", cfg, train_cfg.seed);
  manifest.add_input(data_path);
  manifest.add_artifact(out_path(args, "checkpoint.json"));
  manifest.add_artifact(out_path(args, "loss_curve.csv"));
  manifest.write(out_path(args, "manifest.json"));

  std::cout << "best epoch " << result.best_epoch << " (val_rmse "
            << result.curve[result.best_epoch - 1].val_rmse << ") -> "
            << out_path(args, "checkpoint.json") << "\n";
  return 0;
}

int cmd_predict(const std::string& data_path, const std::string& ckpt_path,
                const CommonArgs& args) {
  const KvConfig cfg = resolve_config(args);
  prepare_out_dir(args);

  const auto [model, meta] = load_checkpoint(ckpt_path);
  MtsRecord record = match_schema(load_record(data_path, cfg), meta);
  const Normalizer norm = meta.normalizer();
  const SplitWindows splits =
      build_splits(record, meta.split, meta.window_len, meta.horizon, &norm);

  const std::string split_name = cfg.get_string("predict.split", "test");
  const auto& windows = pick_split(splits, split_name);
  const auto& slice = pick_slice(splits, split_name);

  const auto predictions = predict_batch(model, windows, norm);
  std::vector<double> truth;
  truth.reserve(windows.size());
  for (const auto& w : windows) truth.push_back(norm.inverse(w.target, 0));

  write_predictions_csv(out_path(args, "predictions.csv"), slice, windows,
                        truth, predictions, meta.window_len, meta.horizon);

  RunManifest manifest = make_manifest("predict", cfg, meta.seed);
  manifest.add_input(data_path);
  manifest.add_input(ckpt_path);
  manifest.add_artifact(out_path(args, "predictions.csv"));
  manifest.write(out_path(args, "manifest.json"));

  std::cout << "wrote " << predictions.size() << " predictions for split '"
            << split_name << "'\n";
  return 0;
}

int cmd_evaluate(const std::string& data_path,
                 const std::vector<std::string>& ckpt_paths,
                 const CommonArgs& args) {
  const KvConfig cfg = resolve_config(args);
  prepare_out_dir(args);
  const std::string split_name = cfg.get_string("eval.split", "test");

  std::vector<RunMetrics> model_runs, persistence_runs;
  for (const auto& ckpt_path : ckpt_paths) {
    const auto [model, meta] = load_checkpoint(ckpt_path);
    MtsRecord record = match_schema(load_record(data_path, cfg), meta);
    const Normalizer norm = meta.normalizer();
    const SplitWindows splits =
        build_splits(record, meta.split, meta.window_len, meta.horizon, &norm);
    const auto& windows = pick_split(splits, split_name);
    if (windows.empty()) {
      fail(ErrorCode::invalid_argument,
           "split '" + split_name + "' has no evaluable windows");
    }

    std::vector<double> truth;
    truth.reserve(windows.size());
    for (const auto& w : windows) truth.push_back(norm.inverse(w.target, 0));

    const auto evaluate_run = [&](std::span<const double> preds) {
      RunMetrics run;
      run.participant = record.participant;
      run.seed = meta.seed;
      run.rmse = rmse(truth, preds);
      run.mape = mape(truth, preds);
      run.mae = mae(truth, preds);
      run.g_rmse = g_rmse(truth, preds);
      const auto lag =
          time_lag(truth, preds, meta.dt_minutes, meta.horizon);
      run.time_lag_minutes = lag.minutes;
      run.lag_degenerate = lag.degenerate;
      return run;
    };

    model_runs.push_back(evaluate_run(predict_batch(model, windows, norm)));
    persistence_runs.push_back(
        evaluate_run(persistence_baseline(windows, norm)));
  }

  const MetricReport model_report = pool_metrics(model_runs);
  const MetricReport persistence_report = pool_metrics(persistence_runs);
  write_report_csv(model_report, out_path(args, "metrics.csv"));
  write_report_csv(persistence_report, out_path(args, "metrics_persistence.csv"));

  const double improvement =
      1.0 - model_report.rmse.mean / persistence_report.rmse.mean;
  std::string table = "model (" + std::to_string(model_runs.size()) +
                      " run(s), split " + split_name + ")\n" +
                      format_report(model_report) +
                      "\npersistence baseline\n" +
                      format_report(persistence_report) + "\n";
  {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "rmse improvement over persistence: %.1f%%\n",
                  improvement * 100.0);
    table += buf;
  }
  {
    std::ofstream txt(out_path(args, "metrics.txt"));
    txt << table;
  }
  std::cout << table;

  RunManifest manifest =
      make_manifest("evaluate", cfg, model_runs.front().seed);
  manifest.add_input(data_path);
  for (const auto& p : ckpt_paths) manifest.add_input(p);
  manifest.add_artifact(out_path(args, "metrics.csv"));
  manifest.add_artifact(out_path(args, "metrics_persistence.csv"));
  manifest.add_artifact(out_path(args, "metrics.txt"));
  manifest.write(out_path(args, "manifest.json"));
  return 0;
}

int cmd_explain(const std::string& data_path, const std::string& ckpt_path,
                bool zero_init, const std::vector<std::size_t>& examples,
                const CommonArgs& args) {
  const KvConfig cfg = resolve_config(args);
  prepare_out_dir(args);

  GarnnModel model;
  CheckpointMeta meta;
  MtsRecord record = load_record(data_path, cfg);
  if (zero_init) {
    // untrained model over this data's schema; normalizer from the train
    // slice so the windows are well-defined
    meta.variables = record.variables;
    meta.window_len = cfg.get_uint("data.window", 48);
    meta.horizon = cfg.get_uint("data.horizon", 6);
    meta.dt_minutes = record.dt_minutes;
    meta.split = split_spec(cfg);
    const SplitRanges ranges =
        chronological_split(record.n_steps(), meta.split);
    const Normalizer norm = Normalizer::fit(slice_record(record, 0, ranges.train_end));
    for (std::size_t v = 0; v < record.n_vars(); ++v) {
      meta.norm_means.push_back(norm.mean(v));
      meta.norm_stds.push_back(norm.stddev(v));
    }
    model = GarnnModel::zeros(model_config(cfg, record.n_vars()));
  } else {
    auto loaded = load_checkpoint(ckpt_path);
    model = std::move(loaded.first);
    meta = std::move(loaded.second);
    record = match_schema(std::move(record), meta);
  }

  const Normalizer norm = meta.normalizer();
  const SplitWindows splits =
      build_splits(record, meta.split, meta.window_len, meta.horizon, &norm);
  const std::string split_name = cfg.get_string("explain.split", "train");
  const auto& windows = pick_split(splits, split_name);
  const auto& slice = pick_slice(splits, split_name);
  if (windows.empty()) {
    fail(ErrorCode::invalid_argument,
         "split '" + split_name + "' has no windows to explain");
  }

  const bool mask_padded = cfg.get_bool("explain.mask_padded", false);
  std::vector<ImportanceMatrix> matrices;
  std::vector<Tensor> masks;
  matrices.reserve(windows.size());
  for (const auto& w : windows) {
    matrices.push_back(importance_matrix(model, w));
    if (mask_padded) {
      std::vector<double> mask(record.n_vars() * meta.window_len, 1.0);
      for (std::size_t v = 0; v < record.n_vars(); ++v) {
        for (std::size_t t = 0; t < meta.window_len; ++t) {
          if (slice.is_missing(w.start_index + t, v)) {
            mask[v * meta.window_len + t] = 0.0;
          }
        }
      }
      masks.push_back(
          Tensor({record.n_vars(), meta.window_len}, std::move(mask)));
    }
  }
  const ImportanceRanking ranking = dataset_importance(
      matrices, mask_padded ? std::span<const Tensor>(masks)
                            : std::span<const Tensor>());

  const std::string annotation =
      std::string("variant=") + variant_name(model.config.variant) +
      " L=" + std::to_string(model.config.layers) +
      " alpha=" + std::to_string(model.config.alpha);

  {
    std::ofstream out(out_path(args, "ranking.csv"));
    out << "rank,variable,importance\n";
    char buf[128];
    for (std::size_t r = 0; r < ranking.order.size(); ++r) {
      const std::size_t j = ranking.order[r];
      std::snprintf(buf, sizeof(buf), "%zu,%s,%.10g\n", r + 1,
                    record.variables[j].c_str(), ranking.importance[j]);
      out << buf;
    }
  }
  {
    std::ofstream out(out_path(args, "ranking.txt"));
    out << "variable importance over split '" << split_name << "' ("
        << annotation << ")\n";
    for (std::size_t r = 0; r < ranking.order.size(); ++r) {
      const std::size_t j = ranking.order[r];
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%2zu. %-14s %+.6f\n", r + 1,
                    record.variables[j].c_str(), ranking.importance[j]);
      out << buf;
    }
  }

  RunManifest manifest = make_manifest("explain", cfg, meta.seed);
  manifest.add_input(data_path);
  if (!zero_init) manifest.add_input(ckpt_path);
  manifest.add_artifact(out_path(args, "ranking.csv"));
  manifest.add_artifact(out_path(args, "ranking.txt"));

  for (const std::size_t index : examples) {
    if (index >= windows.size()) {
      fail(ErrorCode::invalid_argument,
           "example " + std::to_string(index) + " out of range (split has " +
               std::to_string(windows.size()) + " windows)");
    }
    char name[64];
    std::snprintf(name, sizeof(name), "importance_%06zu.csv", index);
    write_importance_csv(matrices[index], record.variables,
                         out_path(args, name));
    manifest.add_artifact(out_path(args, name));

    const FeatureMap map = feature_map(matrices[index]);
    HeatmapSpec spec;
    spec.title = "example " + std::to_string(index) + "  " + annotation;
    std::snprintf(name, sizeof(name), "heatmap_%06zu.svg", index);
    write_heatmap_svg(map.values, record.variables, spec,
                      out_path(args, name));
    manifest.add_artifact(out_path(args, name));
  }

  manifest.write(out_path(args, "manifest.json"));
  std::cout << "top variable: "
            << record.variables[ranking.order.front()] << " (" << annotation
            << ", " << windows.size() << " windows)\n";
  return 0;
}

int cmd_verify(const CommonArgs& args, bool* all_passed) {
  KvConfig cfg = resolve_config(args);
  prepare_out_dir(args);

  const std::size_t static_draws = cfg.get_uint("verify.static_draws", 1000);
  const std::size_t gap_draws = cfg.get_uint("verify.gap_draws", 500);
  const std::size_t window_len = cfg.get_uint("verify.window", 3);
  const std::uint64_t seed = cfg.get_uint("train.seed", 1);
  std::vector<double> alphas = {0.0, 0.2, 0.5, 1.0};
  if (cfg.has("model.alpha")) {
    alphas = {cfg.get_double("model.alpha", 0.2)};
  }
  std::vector<AttentionVariant> variants = {AttentionVariant::gat,
                                            AttentionVariant::gatv2};
  if (cfg.has("model.variant")) {
    variants = {parse_variant(cfg.get_string("model.variant", "gatv2"))};
  }

  Rng rng(seed);
  bool ok = true;
  std::ofstream summary(out_path(args, "summary.txt"));

  const auto random_model = [&](AttentionVariant variant, double alpha) {
    GarnnConfig mc;
    mc.variant = variant;
    mc.n_vars = 2 + rng.uniform_index(4);
    mc.embed_dim = 2 + rng.uniform_index(5);
    mc.attn_dim = 2 + rng.uniform_index(5);
    mc.hidden_dim = 4;
    mc.mlp_hidden = 4;
    mc.layers = 1 + rng.uniform_index(2);
    mc.alpha = alpha;
    return GarnnModel::init(mc, rng.next_u64());
  };
  const auto random_window_for = [&](const GarnnModel& model) {
    MtsWindow w;
    std::vector<double> data(model.config.n_vars * window_len);
    for (double& v : data) v = rng.uniform(-1.5, 1.5);
    w.x = Tensor({model.config.n_vars, window_len}, std::move(data));
    return w;
  };

  // Theorem 2: static ranking of the linearized scores.
  {
    std::ofstream report(out_path(args, "theorem2_static.csv"));
    report << "variant,draws,checks,failures\n";
    for (const auto variant : variants) {
      std::size_t checks = 0, failures = 0;
      for (std::size_t draw = 0; draw < static_draws; ++draw) {
        const GarnnModel model = random_model(variant, 0.2);
        const MtsWindow w = random_window_for(model);
        const auto fwd = model_forward(model, w, TraceLevel::full);
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
      report << variant_name(variant) << ',' << static_draws << ',' << checks
             << ',' << failures << '\n';
      const bool pass = failures == 0;
      ok = ok && pass;
      const std::string line =
          std::string(pass ? "[PASS]" : "[FAIL]") + " theorem2 " +
          variant_name(variant) + ": " + std::to_string(checks) +
          " timestep checks over " + std::to_string(static_draws) +
          " draws, " + std::to_string(failures) + " failures";
      std::cout << line << "\n";
      summary << line << "\n";
    }
  }

  // Theorem 3: gap bounds per variant and slope.
  {
    std::ofstream report(out_path(args, "theorem3_gaps.csv"));
    report << "variant,alpha,draws,max_abs_gap,max_violation,bound_ok,"
              "nonnegative_ok\n";
    for (const auto variant : variants) {
      for (const double alpha : alphas) {
        double max_gap = 0.0, max_violation = -1e300;
        bool bound_ok = true, nonneg_ok = true;
        for (std::size_t draw = 0; draw < gap_draws; ++draw) {
          const GarnnModel model = random_model(variant, alpha);
          const MtsWindow w = random_window_for(model);
          const auto fwd = model_forward(model, w, TraceLevel::full);
          for (std::size_t l = 0; l < model.layers.size(); ++l) {
            const GapReport gap = theorem3_gap(fwd.trace, model, l);
            max_gap = std::max(max_gap, gap.max_abs_gap);
            max_violation = std::max(max_violation, gap.max_violation);
            bound_ok = bound_ok && gap.within_bound;
            if (variant == AttentionVariant::gat) {
              nonneg_ok = nonneg_ok && gap.nonnegative;
            }
          }
        }
        bool pass = bound_ok && nonneg_ok;
        if (alpha == 1.0) pass = pass && max_gap < 1e-12;
        ok = ok && pass;
        char buf[196];
        std::snprintf(buf, sizeof(buf), "%s,%.3g,%zu,%.6e,%.6e,%d,%d\n",
                      variant_name(variant), alpha, gap_draws, max_gap,
                      max_violation, bound_ok ? 1 : 0, nonneg_ok ? 1 : 0);
        report << buf;
        std::snprintf(buf, sizeof(buf),
                      "%s theorem3 %s alpha=%.2f: max |gap| %.3e, max "
                      "violation %.3e over %zu draws",
                      pass ? "[PASS]" : "[FAIL]", variant_name(variant), alpha,
                      max_gap, max_violation, gap_draws);
        std::cout << buf << "\n";
        summary << buf << "\n";
      }
    }
  }

  RunManifest manifest = make_manifest("verify-theorems", cfg, seed);
  manifest.add_artifact(out_path(args, "theorem2_static.csv"));
  manifest.add_artifact(out_path(args, "theorem3_gaps.csv"));
  manifest.add_artifact(out_path(args, "summary.txt"));
  manifest.write(out_path(args, "manifest.json"));

  *all_passed = ok;
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-attentive recurrent networks for multivariate "
               "time-series forecasting with built-in variable importance"};
  app.require_subcommand(1);

  CommonArgs sim_args, train_args, predict_args, eval_args, explain_args,
      verify_args;
  std::string train_data, predict_data, predict_ckpt, eval_data, explain_data,
      explain_ckpt;
  std::vector<std::string> eval_ckpts;
  std::vector<std::size_t> explain_examples = {0};
  bool explain_zero_init = false;

  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
  add_common(sim, sim_args, false);

  CLI::App* train = app.add_subcommand("train", "fit a model on a dataset CSV");
  train->add_option("--data", train_data, "dataset CSV")->required();
  add_common(train, train_args, true);

  CLI::App* predict = app.add_subcommand("predict", "write predictions CSV");
  predict->add_option("--data", predict_data, "dataset CSV")->required();
  predict->add_option("--checkpoint", predict_ckpt, "model checkpoint")->required();
  add_common(predict, predict_args, false);

  CLI::App* evaluate = app.add_subcommand("evaluate", "metric report vs persistence");
  evaluate->add_option("--data", eval_data, "dataset CSV")->required();
  evaluate->add_option("--checkpoint", eval_ckpts, "checkpoint (repeatable)")
      ->required();
  add_common(evaluate, eval_args, false);

  CLI::App* explain = app.add_subcommand(
      "explain", "variable rankings, importance CSVs and heatmaps");
  explain->add_option("--data", explain_data, "dataset CSV")->required();
  explain->add_option("--checkpoint", explain_ckpt, "model checkpoint");
  explain->add_flag("--zero-init", explain_zero_init,
                    "explain an untrained zero model instead of a checkpoint");
  explain->add_option("--example", explain_examples,
                      "window index to export (repeatable)");
  add_common(explain, explain_args, true);

  CLI::App* verify = app.add_subcommand(
      "verify-theorems", "randomized static-ranking and gap-bound checks");
  add_common(verify, verify_args, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_args);
    if (train->parsed()) return cmd_train(train_data, train_args);
    if (predict->parsed()) {
      return cmd_predict(predict_data, predict_ckpt, predict_args);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(eval_data, eval_ckpts, eval_args);
    }
    if (explain->parsed()) {
      if (!explain_zero_init && explain_ckpt.empty()) {
        fail(ErrorCode::config, "explain needs --checkpoint or --zero-init");
      }
      return cmd_explain(explain_data, explain_ckpt, explain_zero_init,
                         explain_examples, explain_args);
    }
    if (verify->parsed()) {
      bool all_passed = false;
      return cmd_verify(verify_args, &all_passed);
    }
  } catch (const Error& e) {
    std::cerr << "error code=" << error_code_name(e.code()) << " message=\""
              << e.what() << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error code=E_UNKNOWN message=\"" << e.what() << "\"\n";
    return 1;
  }
  return 0;
}
