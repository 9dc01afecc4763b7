#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "garnn/data.hpp"
#include "garnn/model.hpp"

namespace garnn {

/// Per-timestep variable importance v[j][t] for one example (N x T).
struct ImportanceMatrix {
  Tensor values;
};

struct ImportanceRanking {
  std::vector<double> importance;  // v^j over the example set, by variable
  std::vector<std::size_t> order;  // variable indices, descending importance,
                                   // ties broken by smaller index
};

/// N x T values min-max scaled to [0, 1] over the whole matrix; a constant
/// matrix maps to an all-0.5 fill.
struct FeatureMap {
  Tensor values;
};

/// Mean over receivers of the post-LeakyReLU pre-softmax scores: the
/// impact of each sender on all variables at this (t, l).
Tensor mean_raw_score(const TimestepAttention& attention);

/// Linearized importance a_key . k for one key vector.
double variable_importance_t(const GraphAttentionLayer& layer,
                             const Tensor& key);

/// v[j] = a_key . k_j for every sender, from the cached keys of one
/// (t, l) attention record. Rejects traces captured without projections.
Tensor layer_importance(const TimestepAttention& attention,
                        const GraphAttentionLayer& layer);

/// Full N x T importance for one example: layer values averaged over the
/// L stacked layers (one extra forward pass with a full trace).
ImportanceMatrix importance_matrix(const GarnnModel& model,
                                   const MtsWindow& window);

/// Dataset-level importance averaged over examples and timesteps, plus the
/// induced descending ranking. An optional mask (same layout as each
/// matrix, nonzero = include) restricts the average, e.g. to non-padded
/// cells; by default every timestep counts.
ImportanceRanking dataset_importance(std::span<const ImportanceMatrix> examples,
                                     std::span<const Tensor> masks = {});

FeatureMap feature_map(const ImportanceMatrix& importance);

struct GapEntry {
  std::size_t t = 0;
  std::size_t j = 0;
  double raw = 0.0;         // mean post-LeakyReLU score
  double linearized = 0.0;  // mean score with LeakyReLU stripped
  double gap = 0.0;         // raw - linearized
  double bound = 0.0;
};

/// Gap between raw and linearized mean scores with its bound, per (t, j),
/// for one layer. GATv2: |gap| <= ||a|| * ||(1/N) sum_n (I~ - I) m||
/// (Cauchy-Schwarz over the indicator-diagonal residual); GAT: the scalar
/// analogue (1/N) sum_n (1-alpha) max(0, -c_n), with gap >= 0. Checks use
/// a 1e-9 relative slack for float roundoff; alpha = 1 collapses every gap
/// to exactly 0.
struct GapReport {
  AttentionVariant variant = AttentionVariant::gatv2;
  double alpha = 0.2;
  std::size_t layer = 0;
  std::vector<GapEntry> entries;
  double max_abs_gap = 0.0;
  double max_violation = 0.0;  // max over entries of |gap| - bound
  bool within_bound = false;
  bool nonnegative = false;  // GAT only: every gap >= 0
};

GapReport theorem3_gap(const AttentionTrace& trace, const GarnnModel& model,
                       std::size_t layer);

struct StaticCheckResult {
  bool linearized_static = false;   // sender argsort identical across receivers
  bool matches_importance = false;  // and identical to the v_t^j argsort
  bool raw_static = false;          // informational: post-LeakyReLU argsort
                                    // agreement (may fail for dynamic scoring)
};

StaticCheckResult static_ranking_check(const TimestepAttention& attention,
                                       const GraphAttentionLayer& layer);

/// Mean absolute prediction change (normalized units) when variable j's
/// channel is replaced by its imputation value (0 post-normalization).
double ablation_oracle(const GarnnModel& model,
                       std::span<const MtsWindow> windows,
                       std::size_t variable);

/// Importance matrix rows/columns exported as CSV: header row of timestep
/// indices, one row per variable.
void write_importance_csv(const ImportanceMatrix& importance,
                          std::span<const std::string> variable_names,
                          const std::string& path);

}  // namespace garnn
