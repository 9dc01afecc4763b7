#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "garnn/data.hpp"
#include "garnn/tape.hpp"
#include "garnn/tensor.hpp"

namespace garnn {

enum class AttentionVariant { gat, gatv2 };

const char* variant_name(AttentionVariant v);
AttentionVariant parse_variant(const std::string& name);

struct GarnnConfig {
  AttentionVariant variant = AttentionVariant::gatv2;
  std::size_t n_vars = 0;        // N, taken from the data
  std::size_t embed_dim = 8;     // E
  std::size_t attn_dim = 8;      // A
  std::size_t hidden_dim = 128;  // D, GRU state size
  std::size_t layers = 1;        // L stacked graph layers
  std::size_t mlp_hidden = 64;
  double alpha = 0.2;            // LeakyReLU slope inside scoring

  void validate() const;
};

/// One graph-attention layer over the complete variable graph.
///
/// The GAT variant shares a single query/key projection (w_key/b_key stay
/// empty and alias the query side) but keeps two attention vectors; GATv2
/// keeps independent projections and a single shared attention vector
/// (attn_key stays empty). The accessors below resolve the sharing.
struct GraphAttentionLayer {
  AttentionVariant variant = AttentionVariant::gatv2;
  double alpha = 0.2;
  Tensor w_query, b_query;  // A x E, A
  Tensor w_key, b_key;      // GATv2 only
  Tensor attn_query;        // query-side attention vector (GATv2: shared)
  Tensor attn_key;          // key-side attention vector (GAT only)
  Tensor w_msg, b_msg;      // E x E, E

  const Tensor& key_weight() const;
  const Tensor& key_bias() const;
  const Tensor& query_attention() const;
  const Tensor& key_attention() const;
};

struct GruParams {
  Tensor w_update, u_update, b_update;  // D x (N*E), D x D, D
  Tensor w_reset, u_reset, b_reset;
  Tensor w_cand, u_cand, b_cand;
};

struct MlpHead {
  Tensor w_hidden, b_hidden;  // mlp_hidden x D, mlp_hidden
  Tensor w_out, b_out;        // 1 x mlp_hidden, 1
};

struct EmbeddingParams {
  Tensor weight;  // N x E; row n is variable n's weight vector
  Tensor bias;    // N x E
};

struct GarnnModel {
  GarnnConfig config;
  EmbeddingParams embedding;
  std::vector<GraphAttentionLayer> layers;
  GruParams gru;
  MlpHead head;

  /// Weights ~ uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero;
  /// the draw sequence is fixed by the parameter enumeration order.
  static GarnnModel init(const GarnnConfig& config, std::uint64_t seed);
  static GarnnModel zeros(const GarnnConfig& config);

  void for_each_param(
      const std::function<void(const std::string&, const Tensor&)>& fn) const;
  void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
  std::vector<Tensor> parameters() const;
  void set_parameters(std::span<const Tensor> params);
  std::size_t param_count() const;
};

/// Per-(timestep, layer) attention record: post-LeakyReLU pre-softmax
/// scores and the normalized weights, both N x N indexed [receiver][sender].
/// Queries/keys (N x A) are captured at TraceLevel::full so importance and
/// gap computations need no extra model pass.
struct TimestepAttention {
  Tensor scores;
  Tensor weights;
  Tensor queries;
  Tensor keys;
};

enum class TraceLevel { none, attention, full };

struct AttentionTrace {
  AttentionVariant variant = AttentionVariant::gatv2;
  double alpha = 0.2;
  std::size_t n_vars = 0;
  bool has_projections = false;
  std::vector<std::vector<TimestepAttention>> steps;  // [t][l]

  std::size_t window_len() const { return steps.size(); }
  std::size_t layer_count() const { return steps.empty() ? 0 : steps[0].size(); }
};

struct ForwardResult {
  double prediction = 0.0;  // normalized units
  AttentionTrace trace;
};

// --- value-level building blocks (each runs on a private tape) --------------

/// relu(w * x + b) for one variable's scalar observation.
Tensor embed_variable(double x, const Tensor& weight, const Tensor& bias);

/// leaky_relu(a1.q + a2.k); the GAT score.
double score_gat(const Tensor& q, const Tensor& k, const Tensor& a_query,
                 const Tensor& a_key, double alpha);

/// a . leaky_relu(q + k); the GATv2 score.
double score_gatv2(const Tensor& q, const Tensor& k, const Tensor& a,
                   double alpha);

/// One attention layer over N embeddings (rows of an N x E matrix):
/// complete graph with self-loops, softmax per receiver, message aggregation.
std::pair<Tensor, TimestepAttention> graph_layer_forward(
    const Tensor& embeddings, const GraphAttentionLayer& layer);

/// One GRU update: h = (1-z) o h_prev + z o candidate.
Tensor gru_step(const Tensor& input, const Tensor& h_prev,
                const GruParams& params);

/// Full forward pass over a window (embed, L graph layers per timestep,
/// GRU across time, MLP head). Deterministic: same window and parameters
/// give a bit-identical prediction.
ForwardResult model_forward(const GarnnModel& model, const MtsWindow& window,
                            TraceLevel level = TraceLevel::none);

// --- tape-level builders for training and gradient checks -------------------

struct BoundLayer {
  ad::ValueId w_query = -1, b_query = -1, w_key = -1, b_key = -1,
              attn_query = -1, attn_key = -1, w_msg = -1, b_msg = -1;
};

struct BoundModel {
  const GarnnModel* model = nullptr;
  ad::ValueId emb_weight = -1, emb_bias = -1;
  std::vector<BoundLayer> layers;
  ad::ValueId gru_wz = -1, gru_uz = -1, gru_bz = -1, gru_wr = -1, gru_ur = -1,
              gru_br = -1, gru_wc = -1, gru_uc = -1, gru_bc = -1;
  ad::ValueId head_w1 = -1, head_b1 = -1, head_w2 = -1, head_b2 = -1;
};

/// Registers every stored parameter on the tape (as trainable leaves with
/// dense ids in enumeration order, or as constants for inference).
BoundModel bind_model(ad::Tape& tape, const GarnnModel& model, bool trainable);

/// Same pass as model_forward, recorded on the caller's tape; returns the
/// prediction node. Captures the trace when requested.
ad::ValueId model_forward_on(ad::Tape& tape, const BoundModel& bound,
                             const Tensor& window_x,
                             TraceLevel level = TraceLevel::none,
                             AttentionTrace* trace = nullptr);

/// Squared prediction error of one example: (prediction - target)^2.
ad::ValueId example_loss_on(ad::Tape& tape, const BoundModel& bound,
                            const MtsWindow& window);

}  // namespace garnn
