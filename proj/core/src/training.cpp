#include "garnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "garnn/error.hpp"
#include "garnn/rng.hpp"
#include "garnn/thread_pool.hpp"

namespace garnn {

using ad::GradientMap;
using ad::Tape;
using ad::ValueId;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    fail(ErrorCode::invalid_argument, "learning rate must be > 0");
  }
  if (lambda < 0.0) fail(ErrorCode::invalid_argument, "lambda must be >= 0");
  if (batch_size == 0) fail(ErrorCode::invalid_argument, "batch size must be >= 1");
  if (max_epochs == 0) fail(ErrorCode::invalid_argument, "max epochs must be >= 1");
  if (patience == 0) fail(ErrorCode::invalid_argument, "patience must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorCode::invalid_argument, "betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail(ErrorCode::invalid_argument, "epsilon must be > 0");
}

double objective(std::span<const double> predictions,
                 std::span<const double> targets,
                 std::span<const Tensor> params, double lambda) {
  if (predictions.empty()) {
    fail(ErrorCode::invalid_argument, "objective needs at least one example");
  }
  if (predictions.size() != targets.size()) {
    fail(ErrorCode::invalid_argument,
         "objective got " + std::to_string(predictions.size()) +
             " predictions for " + std::to_string(targets.size()) + " targets");
  }
  double data = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - targets[i];
    data += r * r;
  }
  data /= static_cast<double>(predictions.size());
  double reg = 0.0;
  for (const auto& p : params) {
    for (double v : p.data()) reg += v * v;
  }
  return data + 0.5 * lambda * reg;
}

ValueId objective_on(Tape& tape, const BoundModel& bound,
                     std::span<const MtsWindow> windows, double lambda) {
  if (windows.empty()) {
    fail(ErrorCode::invalid_argument, "objective needs at least one example");
  }
  std::vector<ValueId> losses;
  losses.reserve(windows.size());
  for (const auto& w : windows) losses.push_back(example_loss_on(tape, bound, w));
  ValueId loss = tape.mean(tape.concat(losses));

  if (lambda > 0.0) {
    // Collect the trainable leaves registered by bind_model.
    std::vector<ValueId> squares;
    const BoundModel& b = bound;
    const auto push = [&](ValueId id) { squares.push_back(tape.sum_squares(id)); };
    push(b.emb_weight);
    push(b.emb_bias);
    for (const auto& layer : b.layers) {
      push(layer.w_query);
      push(layer.b_query);
      if (layer.w_key != layer.w_query) {
        push(layer.w_key);
        push(layer.b_key);
      }
      push(layer.attn_query);
      if (layer.attn_key != layer.attn_query) push(layer.attn_key);
      push(layer.w_msg);
      push(layer.b_msg);
    }
    for (ValueId id : {b.gru_wz, b.gru_uz, b.gru_bz, b.gru_wr, b.gru_ur,
                       b.gru_br, b.gru_wc, b.gru_uc, b.gru_bc, b.head_w1,
                       b.head_b1, b.head_w2, b.head_b2}) {
      push(id);
    }
    ValueId total = squares[0];
    for (std::size_t i = 1; i < squares.size(); ++i) {
      total = tape.add(total, squares[i]);
    }
    loss = tape.add(loss, tape.scale(total, 0.5 * lambda));
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(std::span<const Tensor> params,
                             const TrainConfig& config)
    : lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.epsilon) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void AdamOptimizer::step(std::vector<Tensor>& params,
                         const GradientMap& gradient) {
  if (params.size() != m_.size() || gradient.size() != m_.size()) {
    fail(ErrorCode::invalid_argument, "optimizer state size mismatch");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& g = gradient.data(p);
    auto& m = m_[p];
    auto& v = v_[p];
    std::vector<double> updated(params[p].data().begin(),
                                params[p].data().end());
    for (std::size_t i = 0; i < updated.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      updated[i] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
    params[p] = Tensor(params[p].shape(), std::move(updated));
  }
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

namespace {

double de_normalized_rmse(const GarnnModel& model,
                          std::span<const MtsWindow> windows,
                          const Normalizer& normalizer, ThreadPool& pool) {
  std::vector<double> preds(windows.size());
  pool.parallel_for(0, windows.size(), [&](std::size_t i) {
    preds[i] = model_forward(model, windows[i]).prediction;
  });
  double ss = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const double y = normalizer.inverse(windows[i].target, 0);
    const double yhat = normalizer.inverse(preds[i], 0);
    ss += (yhat - y) * (yhat - y);
  }
  return std::sqrt(ss / static_cast<double>(windows.size()));
}

}  // namespace

FitResult fit(std::span<const MtsWindow> train_windows,
              std::span<const MtsWindow> val_windows, GarnnConfig arch,
              const TrainConfig& config, const Normalizer& normalizer) {
  config.validate();
  if (train_windows.empty() || val_windows.empty()) {
    fail(ErrorCode::invalid_argument, "fit needs non-empty train and validation splits");
  }
  const std::size_t n_vars = train_windows[0].x.shape()[0];
  const std::size_t window_len = train_windows[0].x.shape()[1];
  const auto check_shapes = [&](std::span<const MtsWindow> windows) {
    for (const auto& w : windows) {
      if (w.x.rank() != 2 || w.x.shape()[0] != n_vars ||
          w.x.shape()[1] != window_len) {
        fail(ErrorCode::shape_mismatch,
             "window shape " + w.x.shape_str() + " does not match " +
                 train_windows[0].x.shape_str());
      }
    }
  };
  check_shapes(train_windows);
  check_shapes(val_windows);

  arch.n_vars = n_vars;
  arch.validate();

  GarnnModel model = GarnnModel::init(arch, config.seed);
  std::vector<Tensor> params = model.parameters();
  AdamOptimizer adam(params, config);
  Rng shuffle_rng = Rng(config.seed).fork(1);
  ThreadPool pool(config.threads);

  FitResult result;
  result.seed = config.seed;
  result.best_model = model;
  double best_rmse = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;

  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);

    double epoch_sq_sum = 0.0;
    std::size_t epoch_examples = 0;
    for (std::size_t batch_start = 0; batch_start < order.size();
         batch_start += config.batch_size) {
      const std::size_t batch_end =
          std::min(batch_start + config.batch_size, order.size());
      const std::size_t batch_n = batch_end - batch_start;

      std::vector<GradientMap> slots(batch_n);
      std::vector<double> losses(batch_n);
      try {
        pool.parallel_for(0, batch_n, [&](std::size_t i) {
          const MtsWindow& w = train_windows[order[batch_start + i]];
          Tape tape;
          tape.reserve(64 * window_len);
          const BoundModel bound = bind_model(tape, model, /*trainable=*/true);
          const ValueId loss = example_loss_on(tape, bound, w);
          losses[i] = tape.value(loss).scalar_value();
          slots[i] = tape.backward(loss);
        });
      } catch (const Error& e) {
        if (e.code() == ErrorCode::non_finite) {
          fail(ErrorCode::diverged,
               "training diverged at epoch " + std::to_string(epoch) + ": " +
                   e.what());
        }
        throw;
      }

      GradientMap batch_grad = GradientMap::zeros_like(params);
      const double inv_n = 1.0 / static_cast<double>(batch_n);
      for (std::size_t i = 0; i < batch_n; ++i) {
        batch_grad.axpy(inv_n, slots[i]);  // fixed reduction order
        epoch_sq_sum += losses[i];
      }
      epoch_examples += batch_n;
      if (config.lambda > 0.0) batch_grad.axpy_params(config.lambda, params);

      adam.step(params, batch_grad);
      model.set_parameters(params);
    }

    double reg = 0.0;
    if (config.lambda > 0.0) {
      for (const auto& p : params) {
        for (double v : p.data()) reg += v * v;
      }
    }
    const double train_loss =
        epoch_sq_sum / static_cast<double>(epoch_examples) +
        0.5 * config.lambda * reg;
    if (!std::isfinite(train_loss)) {
      fail(ErrorCode::diverged,
           "training diverged at epoch " + std::to_string(epoch));
    }

    const double val_rmse =
        de_normalized_rmse(model, val_windows, normalizer, pool);
    result.curve.push_back({epoch, train_loss, val_rmse});

    if (val_rmse < best_rmse) {
      best_rmse = val_rmse;
      result.best_model = model;
      result.best_epoch = epoch;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= config.patience) break;
    }
  }
  return result;
}

std::vector<double> predict_batch(const GarnnModel& model,
                                  std::span<const MtsWindow> windows,
                                  const Normalizer& normalizer) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    if (w.x.rank() != 2 || w.x.shape()[0] != model.config.n_vars) {
      fail(ErrorCode::shape_mismatch,
           "window shape " + w.x.shape_str() + " does not match N=" +
               std::to_string(model.config.n_vars));
    }
    out.push_back(normalizer.inverse(model_forward(model, w).prediction, 0));
  }
  return out;
}

std::vector<double> persistence_baseline(std::span<const MtsWindow> windows,
                                         const Normalizer& normalizer) {
  std::vector<double> out;
  out.reserve(windows.size());
  for (const auto& w : windows) {
    const std::size_t t_last = w.x.shape()[1] - 1;
    out.push_back(normalizer.inverse(w.x.at(0, t_last), 0));
  }
  return out;
}

}  // namespace garnn
