#include "garnn/model.hpp"

#include <cmath>

#include "garnn/error.hpp"
#include "garnn/rng.hpp"

namespace garnn {

using ad::Tape;
using ad::ValueId;

const char* variant_name(AttentionVariant v) {
  return v == AttentionVariant::gat ? "gat" : "gatv2";
}

AttentionVariant parse_variant(const std::string& name) {
  if (name == "gat") return AttentionVariant::gat;
  if (name == "gatv2") return AttentionVariant::gatv2;
  fail(ErrorCode::config, "unknown attention variant '" + name + "'");
}

void GarnnConfig::validate() const {
  if (n_vars == 0) fail(ErrorCode::invalid_argument, "model needs N >= 1 variables");
  if (embed_dim == 0 || attn_dim == 0 || hidden_dim == 0 || mlp_hidden == 0) {
    fail(ErrorCode::invalid_argument, "model dimensions must be >= 1");
  }
  if (layers == 0) fail(ErrorCode::invalid_argument, "model needs L >= 1 layers");
  if (alpha < 0.0 || alpha > 1.0) {
    fail(ErrorCode::invalid_argument, "alpha must lie in [0, 1]");
  }
}

const Tensor& GraphAttentionLayer::key_weight() const {
  return variant == AttentionVariant::gat ? w_query : w_key;
}

const Tensor& GraphAttentionLayer::key_bias() const {
  return variant == AttentionVariant::gat ? b_query : b_key;
}

const Tensor& GraphAttentionLayer::query_attention() const { return attn_query; }

const Tensor& GraphAttentionLayer::key_attention() const {
  return variant == AttentionVariant::gat ? attn_key : attn_query;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

namespace {

Tensor uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                      std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> data(rows * cols);
  for (double& v : data) v = rng.uniform(-bound, bound);
  return Tensor::matrix(rows, cols, std::move(data));
}

Tensor uniform_vector(Rng& rng, std::size_t n, std::size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> data(n);
  for (double& v : data) v = rng.uniform(-bound, bound);
  return Tensor::vector(std::move(data));
}

}  // namespace

GarnnModel GarnnModel::init(const GarnnConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const std::size_t n = config.n_vars;
  const std::size_t e = config.embed_dim;
  const std::size_t a = config.attn_dim;
  const std::size_t d = config.hidden_dim;
  const std::size_t in = n * e;

  GarnnModel m;
  m.config = config;
  m.embedding.weight = uniform_matrix(rng, n, e, 1);
  m.embedding.bias = Tensor::zeros({n, e});

  for (std::size_t l = 0; l < config.layers; ++l) {
    GraphAttentionLayer layer;
    layer.variant = config.variant;
    layer.alpha = config.alpha;
    layer.w_query = uniform_matrix(rng, a, e, e);
    layer.b_query = Tensor::zeros({a});
    if (config.variant == AttentionVariant::gatv2) {
      layer.w_key = uniform_matrix(rng, a, e, e);
      layer.b_key = Tensor::zeros({a});
      layer.attn_query = uniform_vector(rng, a, a);
    } else {
      layer.attn_query = uniform_vector(rng, a, a);
      layer.attn_key = uniform_vector(rng, a, a);
    }
    layer.w_msg = uniform_matrix(rng, e, e, e);
    layer.b_msg = Tensor::zeros({e});
    m.layers.push_back(std::move(layer));
  }

  m.gru.w_update = uniform_matrix(rng, d, in, in);
  m.gru.u_update = uniform_matrix(rng, d, d, d);
  m.gru.b_update = Tensor::zeros({d});
  m.gru.w_reset = uniform_matrix(rng, d, in, in);
  m.gru.u_reset = uniform_matrix(rng, d, d, d);
  m.gru.b_reset = Tensor::zeros({d});
  m.gru.w_cand = uniform_matrix(rng, d, in, in);
  m.gru.u_cand = uniform_matrix(rng, d, d, d);
  m.gru.b_cand = Tensor::zeros({d});

  m.head.w_hidden = uniform_matrix(rng, config.mlp_hidden, d, d);
  m.head.b_hidden = Tensor::zeros({config.mlp_hidden});
  m.head.w_out = uniform_matrix(rng, 1, config.mlp_hidden, config.mlp_hidden);
  m.head.b_out = Tensor::zeros({1});
  return m;
}

GarnnModel GarnnModel::zeros(const GarnnConfig& config) {
  GarnnModel m = init(config, 0);
  m.for_each_param([](const std::string&, Tensor& t) {
    t = Tensor::zeros(t.shape());
  });
  return m;
}

void GarnnModel::for_each_param(
    const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("embedding.weight", embedding.weight);
  fn("embedding.bias", embedding.bias);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& layer = layers[l];
    const std::string base = "layers." + std::to_string(l) + ".";
    if (layer.variant == AttentionVariant::gat) {
      fn(base + "qk_proj.weight", layer.w_query);
      fn(base + "qk_proj.bias", layer.b_query);
      fn(base + "attn_query", layer.attn_query);
      fn(base + "attn_key", layer.attn_key);
    } else {
      fn(base + "query_proj.weight", layer.w_query);
      fn(base + "query_proj.bias", layer.b_query);
      fn(base + "key_proj.weight", layer.w_key);
      fn(base + "key_proj.bias", layer.b_key);
      fn(base + "attn", layer.attn_query);
    }
    fn(base + "message.weight", layer.w_msg);
    fn(base + "message.bias", layer.b_msg);
  }
  fn("gru.update.input", gru.w_update);
  fn("gru.update.recurrent", gru.u_update);
  fn("gru.update.bias", gru.b_update);
  fn("gru.reset.input", gru.w_reset);
  fn("gru.reset.recurrent", gru.u_reset);
  fn("gru.reset.bias", gru.b_reset);
  fn("gru.candidate.input", gru.w_cand);
  fn("gru.candidate.recurrent", gru.u_cand);
  fn("gru.candidate.bias", gru.b_cand);
  fn("head.hidden.weight", head.w_hidden);
  fn("head.hidden.bias", head.b_hidden);
  fn("head.output.weight", head.w_out);
  fn("head.output.bias", head.b_out);
}

void GarnnModel::for_each_param(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<GarnnModel*>(this)->for_each_param(
      [&](const std::string& path, Tensor& t) { fn(path, t); });
}

std::vector<Tensor> GarnnModel::parameters() const {
  std::vector<Tensor> out;
  for_each_param([&](const std::string&, const Tensor& t) { out.push_back(t); });
  return out;
}

void GarnnModel::set_parameters(std::span<const Tensor> params) {
  std::size_t i = 0;
  for_each_param([&](const std::string& path, Tensor& t) {
    if (i >= params.size()) {
      fail(ErrorCode::invalid_argument, "too few parameter tensors");
    }
    if (!params[i].same_shape(t)) {
      fail(ErrorCode::shape_mismatch,
           "parameter " + path + " expects " + t.shape_str() + ", got " +
               params[i].shape_str());
    }
    t = params[i++];
  });
  if (i != params.size()) {
    fail(ErrorCode::invalid_argument, "too many parameter tensors");
  }
}

std::size_t GarnnModel::param_count() const {
  std::size_t n = 0;
  for_each_param([&](const std::string&, const Tensor&) { ++n; });
  return n;
}

// ---------------------------------------------------------------------------
// Tape binding and forward pass
// ---------------------------------------------------------------------------

BoundModel bind_model(Tape& tape, const GarnnModel& model, bool trainable) {
  BoundModel bound;
  bound.model = &model;
  int next_id = 0;
  std::vector<ValueId> ids;
  model.for_each_param([&](const std::string&, const Tensor& t) {
    ids.push_back(trainable ? tape.param(t, next_id++) : tape.constant(t));
  });

  std::size_t i = 0;
  bound.emb_weight = ids[i++];
  bound.emb_bias = ids[i++];
  for (const auto& layer : model.layers) {
    BoundLayer bl{};
    if (layer.variant == AttentionVariant::gat) {
      bl.w_query = ids[i++];
      bl.b_query = ids[i++];
      bl.w_key = bl.w_query;  // shared projection
      bl.b_key = bl.b_query;
      bl.attn_query = ids[i++];
      bl.attn_key = ids[i++];
    } else {
      bl.w_query = ids[i++];
      bl.b_query = ids[i++];
      bl.w_key = ids[i++];
      bl.b_key = ids[i++];
      bl.attn_query = ids[i++];
      bl.attn_key = bl.attn_query;  // shared attention vector
    }
    bl.w_msg = ids[i++];
    bl.b_msg = ids[i++];
    bound.layers.push_back(bl);
  }
  bound.gru_wz = ids[i++];
  bound.gru_uz = ids[i++];
  bound.gru_bz = ids[i++];
  bound.gru_wr = ids[i++];
  bound.gru_ur = ids[i++];
  bound.gru_br = ids[i++];
  bound.gru_wc = ids[i++];
  bound.gru_uc = ids[i++];
  bound.gru_bc = ids[i++];
  bound.head_w1 = ids[i++];
  bound.head_b1 = ids[i++];
  bound.head_w2 = ids[i++];
  bound.head_b2 = ids[i++];
  return bound;
}

namespace {

struct LayerTapeResult {
  ValueId out;      // N x E updated embeddings
  ValueId scores;   // N x N post-LeakyReLU
  ValueId weights;  // N x N softmax rows
  ValueId queries;  // N x A
  ValueId keys;     // N x A
};

// Row n of the result is W e_n + b: computed stacked as Emb W^T + b.
ValueId project_nodes(Tape& tape, ValueId emb, ValueId weight, ValueId bias) {
  return tape.add_rowvec(tape.matmul(emb, tape.transpose(weight)), bias);
}

LayerTapeResult graph_layer_on(Tape& tape, const BoundLayer& layer,
                               AttentionVariant variant, double alpha,
                               ValueId emb, std::size_t n) {
  LayerTapeResult r{};
  r.queries = project_nodes(tape, emb, layer.w_query, layer.b_query);
  r.keys = project_nodes(tape, emb, layer.w_key, layer.b_key);

  if (variant == AttentionVariant::gat) {
    // s[n][j] = leaky(a1.q_n + a2.k_j): outer sum of two projections.
    ValueId receiver = tape.matmul(r.queries, layer.attn_query);  // N
    ValueId sender = tape.matmul(r.keys, layer.attn_key);         // N
    ValueId pre = tape.outer_add(receiver, sender);               // N x N
    r.scores = tape.leaky_relu(pre, alpha);
  } else {
    // s[n][j] = a . leaky(q_n + k_j) over all pairs.
    ValueId pairs = tape.pair_sum(r.queries, r.keys);     // (N*N) x A
    ValueId activated = tape.leaky_relu(pairs, alpha);    // (N*N) x A
    ValueId flat = tape.matmul(activated, layer.attn_query);  // N*N
    r.scores = tape.reshape(flat, {n, n});
  }

  r.weights = tape.softmax(r.scores);

  // Messages W e_j + b stacked, then receiver-weighted aggregation.
  ValueId messages = project_nodes(tape, emb, layer.w_msg, layer.b_msg);
  r.out = tape.matmul(r.weights, messages);  // N x E
  return r;
}

ValueId gru_step_on(Tape& tape, const BoundModel& bound, ValueId input,
                    ValueId h_prev, ValueId ones) {
  ValueId z = tape.sigmoid(tape.add(
      tape.add(tape.matmul(bound.gru_wz, input), tape.matmul(bound.gru_uz, h_prev)),
      bound.gru_bz));
  ValueId r = tape.sigmoid(tape.add(
      tape.add(tape.matmul(bound.gru_wr, input), tape.matmul(bound.gru_ur, h_prev)),
      bound.gru_br));
  ValueId gated = tape.mul(r, h_prev);
  ValueId cand = tape.tanh(tape.add(
      tape.add(tape.matmul(bound.gru_wc, input), tape.matmul(bound.gru_uc, gated)),
      bound.gru_bc));
  ValueId keep = tape.mul(tape.sub(ones, z), h_prev);
  return tape.add(keep, tape.mul(z, cand));
}

}  // namespace

ValueId model_forward_on(Tape& tape, const BoundModel& bound,
                         const Tensor& window_x, TraceLevel level,
                         AttentionTrace* trace) {
  const GarnnModel& model = *bound.model;
  const GarnnConfig& cfg = model.config;
  if (window_x.rank() != 2 || window_x.shape()[0] != cfg.n_vars) {
    fail(ErrorCode::shape_mismatch,
         "window shape " + window_x.shape_str() + " does not match N=" +
             std::to_string(cfg.n_vars));
  }
  const std::size_t n = cfg.n_vars;
  const std::size_t e = cfg.embed_dim;
  const std::size_t t_len = window_x.shape()[1];

  if (trace && level != TraceLevel::none) {
    trace->variant = cfg.variant;
    trace->alpha = cfg.alpha;
    trace->n_vars = n;
    trace->has_projections = level == TraceLevel::full;
    trace->steps.assign(t_len, {});
  }

  ValueId h = tape.constant(Tensor::zeros({cfg.hidden_dim}));
  ValueId ones = tape.constant(Tensor::full({cfg.hidden_dim}, 1.0));

  for (std::size_t t = 0; t < t_len; ++t) {
    std::vector<double> column(n);
    for (std::size_t v = 0; v < n; ++v) column[v] = window_x.at(v, t);
    ValueId x_t = tape.constant(Tensor::vector(std::move(column)));

    // e_t^n = relu(w^n x_t^n + b^n), all variables at once.
    ValueId scaled = tape.row_scale(bound.emb_weight, x_t);
    ValueId emb = tape.relu(tape.add(scaled, bound.emb_bias));

    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      const auto result = graph_layer_on(tape, bound.layers[l], cfg.variant,
                                         cfg.alpha, emb, n);
      emb = result.out;
      if (trace && level != TraceLevel::none) {
        TimestepAttention att;
        att.scores = tape.value(result.scores);
        att.weights = tape.value(result.weights);
        if (level == TraceLevel::full) {
          att.queries = tape.value(result.queries);
          att.keys = tape.value(result.keys);
        }
        trace->steps[t].push_back(std::move(att));
      }
    }

    // Row-major flatten = concatenation of the N last-layer representations.
    ValueId gru_input = tape.reshape(emb, {n * e});
    h = gru_step_on(tape, bound, gru_input, h, ones);
  }

  ValueId hidden = tape.relu(
      tape.add(tape.matmul(bound.head_w1, h), bound.head_b1));
  ValueId out = tape.add(tape.matmul(bound.head_w2, hidden), bound.head_b2);
  return tape.reshape(out, {});
}

ValueId example_loss_on(Tape& tape, const BoundModel& bound,
                        const MtsWindow& window) {
  ValueId pred = model_forward_on(tape, bound, window.x);
  ValueId target = tape.constant_scalar(window.target);
  return tape.square(tape.sub(pred, target));
}

// ---------------------------------------------------------------------------
// Value-level building blocks (each on a private tape)
// ---------------------------------------------------------------------------

Tensor embed_variable(double x, const Tensor& weight, const Tensor& bias) {
  if (!std::isfinite(x)) {
    fail(ErrorCode::non_finite, "embed_variable: observation is not finite");
  }
  if (weight.rank() != 1 || !weight.same_shape(bias)) {
    fail(ErrorCode::shape_mismatch,
         "embed_variable: weight " + weight.shape_str() + " and bias " +
             bias.shape_str() + " must be equal-length vectors");
  }
  Tape tape;
  ValueId w = tape.constant(weight);
  ValueId b = tape.constant(bias);
  ValueId out = tape.relu(tape.add(tape.scale(w, x), b));
  return tape.value(out);
}

double score_gat(const Tensor& q, const Tensor& k, const Tensor& a_query,
                 const Tensor& a_key, double alpha) {
  Tape tape;
  ValueId s = tape.add(tape.matmul(tape.constant(a_query), tape.constant(q)),
                       tape.matmul(tape.constant(a_key), tape.constant(k)));
  return tape.value(tape.leaky_relu(s, alpha)).scalar_value();
}

double score_gatv2(const Tensor& q, const Tensor& k, const Tensor& a,
                   double alpha) {
  Tape tape;
  ValueId pre = tape.add(tape.constant(q), tape.constant(k));
  ValueId s = tape.matmul(tape.constant(a), tape.leaky_relu(pre, alpha));
  return tape.value(s).scalar_value();
}

std::pair<Tensor, TimestepAttention> graph_layer_forward(
    const Tensor& embeddings, const GraphAttentionLayer& layer) {
  if (embeddings.rank() != 2) {
    fail(ErrorCode::shape_mismatch,
         "graph_layer_forward: embeddings must be N x E, got " +
             embeddings.shape_str());
  }
  const std::size_t n = embeddings.shape()[0];
  if (n == 0) fail(ErrorCode::invalid_argument, "graph layer needs N >= 1");

  Tape tape;
  BoundLayer bl{};
  bl.w_query = tape.constant(layer.w_query);
  bl.b_query = tape.constant(layer.b_query);
  bl.w_key = tape.constant(layer.key_weight());
  bl.b_key = tape.constant(layer.key_bias());
  bl.attn_query = tape.constant(layer.query_attention());
  bl.attn_key = tape.constant(layer.key_attention());
  bl.w_msg = tape.constant(layer.w_msg);
  bl.b_msg = tape.constant(layer.b_msg);

  ValueId emb = tape.constant(embeddings);
  const auto result =
      graph_layer_on(tape, bl, layer.variant, layer.alpha, emb, n);

  TimestepAttention att;
  att.scores = tape.value(result.scores);
  att.weights = tape.value(result.weights);
  att.queries = tape.value(result.queries);
  att.keys = tape.value(result.keys);
  return {tape.value(result.out), std::move(att)};
}

Tensor gru_step(const Tensor& input, const Tensor& h_prev,
                const GruParams& params) {
  Tape tape;
  BoundModel bound;
  bound.gru_wz = tape.constant(params.w_update);
  bound.gru_uz = tape.constant(params.u_update);
  bound.gru_bz = tape.constant(params.b_update);
  bound.gru_wr = tape.constant(params.w_reset);
  bound.gru_ur = tape.constant(params.u_reset);
  bound.gru_br = tape.constant(params.b_reset);
  bound.gru_wc = tape.constant(params.w_cand);
  bound.gru_uc = tape.constant(params.u_cand);
  bound.gru_bc = tape.constant(params.b_cand);
  ValueId ones = tape.constant(Tensor::full(h_prev.shape(), 1.0));
  ValueId h = gru_step_on(tape, bound, tape.constant(input),
                          tape.constant(h_prev), ones);
  return tape.value(h);
}

ForwardResult model_forward(const GarnnModel& model, const MtsWindow& window,
                            TraceLevel level) {
  Tape tape;
  const BoundModel bound = bind_model(tape, model, /*trainable=*/false);
  ForwardResult result;
  ValueId pred =
      model_forward_on(tape, bound, window.x, level,
                       level == TraceLevel::none ? nullptr : &result.trace);
  result.prediction = tape.value(pred).scalar_value();
  return result;
}

}  // namespace garnn
