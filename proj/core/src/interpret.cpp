#include "garnn/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "garnn/error.hpp"
#include "garnn/thread_pool.hpp"

namespace garnn {

namespace {

void require_projections(const TimestepAttention& attention) {
  if (attention.queries.empty() || attention.keys.empty()) {
    fail(ErrorCode::invalid_argument,
         "attention record lacks cached queries/keys; capture the trace at "
         "TraceLevel::full");
  }
}

std::vector<std::size_t> descending_argsort(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (values[a] != values[b]) return values[a] > values[b];
                     return a < b;
                   });
  return order;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace

Tensor mean_raw_score(const TimestepAttention& attention) {
  const Tensor& s = attention.scores;
  if (s.rank() != 2 || s.shape()[0] != s.shape()[1]) {
    fail(ErrorCode::shape_mismatch,
         "scores must be N x N, got " + s.shape_str());
  }
  const std::size_t n = s.shape()[0];
  std::vector<double> out(n, 0.0);
  for (std::size_t recv = 0; recv < n; ++recv) {
    for (std::size_t send = 0; send < n; ++send) {
      out[send] += s.at(recv, send);
    }
  }
  for (double& v : out) v /= static_cast<double>(n);
  return Tensor::vector(std::move(out));
}

double variable_importance_t(const GraphAttentionLayer& layer,
                             const Tensor& key) {
  const Tensor& a = layer.key_attention();
  if (!a.same_shape(key)) {
    fail(ErrorCode::shape_mismatch, "key " + key.shape_str() +
                                        " does not match attention vector " +
                                        a.shape_str());
  }
  return dot(a.data(), key.data());
}

Tensor layer_importance(const TimestepAttention& attention,
                        const GraphAttentionLayer& layer) {
  require_projections(attention);
  const Tensor& keys = attention.keys;  // N x A
  const Tensor& a = layer.key_attention();
  const std::size_t n = keys.shape()[0];
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = dot(keys.data().subspan(j * a.size(), a.size()), a.data());
  }
  return Tensor::vector(std::move(out));
}

ImportanceMatrix importance_matrix(const GarnnModel& model,
                                   const MtsWindow& window) {
  const ForwardResult fwd = model_forward(model, window, TraceLevel::full);
  const std::size_t n = model.config.n_vars;
  const std::size_t t_len = window.x.shape()[1];
  const std::size_t n_layers = model.layers.size();

  std::vector<double> values(n * t_len, 0.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t l = 0; l < n_layers; ++l) {
      const Tensor v = layer_importance(fwd.trace.steps[t][l], model.layers[l]);
      for (std::size_t j = 0; j < n; ++j) {
        values[j * t_len + t] += v[j];
      }
    }
  }
  const double inv_layers = 1.0 / static_cast<double>(n_layers);
  for (double& v : values) v *= inv_layers;
  return {Tensor::matrix(n, t_len, std::move(values))};
}

ImportanceRanking dataset_importance(std::span<const ImportanceMatrix> examples,
                                     std::span<const Tensor> masks) {
  if (examples.empty()) {
    fail(ErrorCode::invalid_argument,
         "dataset_importance needs at least one example");
  }
  if (!masks.empty() && masks.size() != examples.size()) {
    fail(ErrorCode::invalid_argument,
         "mask count does not match example count");
  }
  const auto& first = examples[0].values;
  const std::size_t n = first.shape()[0];
  const std::size_t t_len = first.shape()[1];

  std::vector<double> sums(n, 0.0);
  std::vector<double> counts(n, 0.0);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const Tensor& m = examples[i].values;
    if (!m.same_shape(first)) {
      fail(ErrorCode::shape_mismatch,
           "importance matrices disagree: " + m.shape_str() + " vs " +
               first.shape_str());
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t t = 0; t < t_len; ++t) {
        if (!masks.empty() && masks[i].at(j, t) == 0.0) continue;
        sums[j] += m.at(j, t);
        counts[j] += 1.0;
      }
    }
  }

  ImportanceRanking out;
  out.importance.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    out.importance[j] = counts[j] > 0.0 ? sums[j] / counts[j] : 0.0;
  }
  out.order = descending_argsort(out.importance);
  return out;
}

FeatureMap feature_map(const ImportanceMatrix& importance) {
  const Tensor& m = importance.values;
  double lo = m[0], hi = m[0];
  for (double v : m.data()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<double> out(m.size());
  if (hi == lo) {
    std::fill(out.begin(), out.end(), 0.5);
  } else {
    const double inv = 1.0 / (hi - lo);
    const auto data = m.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (data[i] - lo) * inv;
  }
  return {Tensor(m.shape(), std::move(out))};
}

// ---------------------------------------------------------------------------
// Theorem checks
// ---------------------------------------------------------------------------

GapReport theorem3_gap(const AttentionTrace& trace, const GarnnModel& model,
                       std::size_t layer_index) {
  if (layer_index >= model.layers.size()) {
    fail(ErrorCode::invalid_argument, "layer index out of range");
  }
  if (!trace.has_projections) {
    fail(ErrorCode::invalid_argument,
         "trace lacks pre-activation projections; capture at TraceLevel::full");
  }
  const GraphAttentionLayer& layer = model.layers[layer_index];
  const double alpha = layer.alpha;
  const Tensor& a_query = layer.query_attention();
  const Tensor& a_key = layer.key_attention();
  const std::size_t dim = a_key.size();

  GapReport report;
  report.variant = layer.variant;
  report.alpha = alpha;
  report.layer = layer_index;
  report.nonnegative = true;

  double a_norm = 0.0;
  for (double v : a_key.data()) a_norm += v * v;
  a_norm = std::sqrt(a_norm);

  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const TimestepAttention& att = trace.steps[t][layer_index];
    require_projections(att);
    const std::size_t n = att.queries.shape()[0];
    const auto q = att.queries.data();
    const auto k = att.keys.data();

    for (std::size_t j = 0; j < n; ++j) {
      GapEntry entry;
      entry.t = t;
      entry.j = j;

      if (layer.variant == AttentionVariant::gatv2) {
        // residual d = (1/N) sum_n (I~ - I) m^{n,j}, m = q_n + k_j
        std::vector<double> residual(dim, 0.0);
        double raw = 0.0, lin = 0.0;
        for (std::size_t recv = 0; recv < n; ++recv) {
          for (std::size_t d = 0; d < dim; ++d) {
            const double m = q[recv * dim + d] + k[j * dim + d];
            const double indicator = m >= 0.0 ? 1.0 : alpha;
            residual[d] += (indicator - 1.0) * m;
            raw += a_key[d] * (m > 0.0 ? m : alpha * m);
            lin += a_key[d] * m;
          }
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        double d_norm = 0.0;
        for (double& v : residual) {
          v *= inv_n;
          d_norm += v * v;
        }
        entry.raw = raw * inv_n;
        entry.linearized = lin * inv_n;
        entry.gap = entry.raw - entry.linearized;
        entry.bound = a_norm * std::sqrt(d_norm);
      } else {
        // scalar scores c = a1.q_n + a2.k_j
        double raw = 0.0, lin = 0.0, bound = 0.0;
        const double key_term = dot(k.subspan(j * dim, dim), a_key.data());
        for (std::size_t recv = 0; recv < n; ++recv) {
          const double c =
              dot(q.subspan(recv * dim, dim), a_query.data()) + key_term;
          raw += c > 0.0 ? c : alpha * c;
          lin += c;
          bound += (1.0 - alpha) * std::max(0.0, -c);
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        entry.raw = raw * inv_n;
        entry.linearized = lin * inv_n;
        entry.gap = entry.raw - entry.linearized;
        entry.bound = bound * inv_n;
        if (entry.gap < 0.0) report.nonnegative = false;
      }

      report.max_abs_gap = std::max(report.max_abs_gap, std::abs(entry.gap));
      report.max_violation =
          std::max(report.max_violation, std::abs(entry.gap) - entry.bound);
      report.entries.push_back(entry);
    }
  }

  // Cauchy-Schwarz holds exactly; the slack only absorbs float roundoff.
  double max_bound = 0.0;
  for (const auto& e : report.entries) max_bound = std::max(max_bound, e.bound);
  report.within_bound = report.max_violation <= 1e-9 * std::max(1.0, max_bound);
  return report;
}

namespace {

// True iff `order` is a valid descending argsort of `row`: the permuted
// row never strictly increases. Exact float comparisons; equal entries
// are compatible with any order. Summing the receiver constant into a
// score can round a few-ulp sender difference into an exact tie, and a
// tie must not count as an inversion of the ranking.
bool valid_descending_order(std::span<const double> row,
                            std::span<const std::size_t> order) {
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    if (row[order[i]] < row[order[i + 1]]) return false;
  }
  return true;
}

}  // namespace

StaticCheckResult static_ranking_check(const TimestepAttention& attention,
                                       const GraphAttentionLayer& layer) {
  require_projections(attention);
  const std::size_t n = attention.queries.shape()[0];
  const std::size_t dim = layer.key_attention().size();
  const auto q = attention.queries.data();
  const auto k = attention.keys.data();

  // Linearized scores: s_hat[recv][send] = a_q.q_recv + a_k.k_send.
  std::vector<double> recv_term(n), send_term(n);
  for (std::size_t i = 0; i < n; ++i) {
    recv_term[i] = dot(q.subspan(i * dim, dim), layer.query_attention().data());
    send_term[i] = dot(k.subspan(i * dim, dim), layer.key_attention().data());
  }

  StaticCheckResult result;
  result.linearized_static = true;
  result.raw_static = true;

  // The importance ranking (v_j = a_k.k_j) must order every receiver's
  // linearized row: adding the receiver constant cancels in exact
  // arithmetic, so an inversion would expose a structural defect.
  const std::vector<std::size_t> reference = descending_argsort(send_term);
  std::vector<double> row(n);
  for (std::size_t recv = 0; recv < n; ++recv) {
    for (std::size_t send = 0; send < n; ++send) {
      row[send] = recv_term[recv] + send_term[send];
    }
    if (!valid_descending_order(row, reference)) {
      result.linearized_static = false;
    }
  }
  result.matches_importance =
      result.linearized_static && valid_descending_order(send_term, reference);

  // Raw post-LeakyReLU scores: static for GAT by monotonicity, possibly
  // dynamic for GATv2.
  std::vector<std::size_t> raw_reference;
  for (std::size_t recv = 0; recv < n; ++recv) {
    for (std::size_t send = 0; send < n; ++send) {
      row[send] = attention.scores.at(recv, send);
    }
    if (recv == 0) raw_reference = descending_argsort(row);
    if (!valid_descending_order(row, raw_reference)) {
      result.raw_static = false;
    }
  }
  return result;
}

double ablation_oracle(const GarnnModel& model,
                       std::span<const MtsWindow> windows,
                       std::size_t variable) {
  if (variable >= model.config.n_vars) {
    fail(ErrorCode::invalid_argument, "ablation variable index out of range");
  }
  if (windows.empty()) return 0.0;

  std::vector<double> deltas(windows.size());
  ThreadPool pool;
  pool.parallel_for(0, windows.size(), [&](std::size_t i) {
    const MtsWindow& w = windows[i];
    const double base = model_forward(model, w).prediction;

    const std::size_t t_len = w.x.shape()[1];
    std::vector<double> ablated(w.x.data().begin(), w.x.data().end());
    std::fill(ablated.begin() + variable * t_len,
              ablated.begin() + (variable + 1) * t_len, 0.0);
    MtsWindow modified = w;
    modified.x = Tensor(w.x.shape(), std::move(ablated));
    deltas[i] = std::abs(model_forward(model, modified).prediction - base);
  });

  double total = 0.0;
  for (double d : deltas) total += d;
  return total / static_cast<double>(windows.size());
}

void write_importance_csv(const ImportanceMatrix& importance,
                          std::span<const std::string> variable_names,
                          const std::string& path) {
  const Tensor& m = importance.values;
  if (variable_names.size() != m.shape()[0]) {
    fail(ErrorCode::invalid_argument,
         "variable name count does not match importance rows");
  }
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << "variable";
  for (std::size_t t = 0; t < m.shape()[1]; ++t) out << ",t" << (t + 1);
  out << '\n';
  char buf[32];
  for (std::size_t j = 0; j < m.shape()[0]; ++j) {
    out << variable_names[j];
    for (std::size_t t = 0; t < m.shape()[1]; ++t) {
      std::snprintf(buf, sizeof(buf), ",%.10g", m.at(j, t));
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace garnn
