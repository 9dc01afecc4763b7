#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "garnn/data.hpp"
#include "garnn/model.hpp"
#include "garnn/tape.hpp"

namespace garnn {

struct TrainConfig {
  double learning_rate = 1e-3;
  double lambda = 1e-5;  // L2 coefficient; applied inside the loss
  std::size_t batch_size = 64;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct EpochPoint {
  std::size_t epoch = 0;       // 1-based
  double train_loss = 0.0;     // mean squared error + L2 term at epoch end
  double val_rmse = 0.0;       // de-normalized (original units)
};

struct FitResult {
  GarnnModel best_model;
  std::vector<EpochPoint> curve;
  std::size_t best_epoch = 0;  // 1-based index into curve
  std::uint64_t seed = 0;
};

/// Mean squared error plus (lambda/2)*||theta||^2 over all parameters.
double objective(std::span<const double> predictions,
                 std::span<const double> targets,
                 std::span<const Tensor> params, double lambda);

/// The same objective recorded as one tape over a window set; used by the
/// finite-difference invariant (the lambda*theta gradient term included).
ad::ValueId objective_on(ad::Tape& tape, const BoundModel& bound,
                         std::span<const MtsWindow> windows, double lambda);

/// Adam on the batched objective gradient. Exposed so the
/// step-with-zero-learning-rate invariant is testable in isolation.
class AdamOptimizer {
 public:
  AdamOptimizer(std::span<const Tensor> params, const TrainConfig& config);
  void step(std::vector<Tensor>& params, const ad::GradientMap& gradient);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Mini-batch Adam on Eq-style MSE + L2 with per-epoch validation RMSE,
/// patience-based early stopping, and best-epoch checkpointing.
/// Deterministic given config.seed: the init and shuffle streams are fixed
/// and per-example gradients are reduced in example order, so any thread
/// count produces the same result. Throws ErrorCode::diverged (message
/// carries the epoch) if the loss becomes non-finite.
FitResult fit(std::span<const MtsWindow> train_windows,
              std::span<const MtsWindow> val_windows, GarnnConfig arch,
              const TrainConfig& config, const Normalizer& normalizer);

/// One de-normalized prediction per window (original target units).
std::vector<double> predict_batch(const GarnnModel& model,
                                  std::span<const MtsWindow> windows,
                                  const Normalizer& normalizer);

/// Persistence baseline: the de-normalized last observed target value of
/// each window (y at the window end).
std::vector<double> persistence_baseline(std::span<const MtsWindow> windows,
                                         const Normalizer& normalizer);

}  // namespace garnn
