#include <algorithm>
#include <cmath>
#include <numeric>

#include <doctest.h>

#include "garnn/error.hpp"
#include "garnn/grad_check.hpp"
#include "garnn/model.hpp"
#include "garnn/rng.hpp"
#include "test_util.hpp"

using namespace garnn;
using garnn::test::random_tensor;
using garnn::test::random_window;

namespace {

double manual_leaky(double x, double alpha) { return x > 0 ? x : alpha * x; }

GarnnConfig small_config(AttentionVariant variant, std::size_t n_vars,
                         std::size_t layers = 1) {
  GarnnConfig cfg;
  cfg.variant = variant;
  cfg.n_vars = n_vars;
  cfg.embed_dim = 3;
  cfg.attn_dim = 3;
  cfg.hidden_dim = 5;
  cfg.mlp_hidden = 4;
  cfg.layers = layers;
  cfg.alpha = 0.2;
  return cfg;
}

}  // namespace

TEST_CASE("embed_variable examples") {
  SUBCASE("x=0 keeps only the rectified bias") {
    const Tensor e = embed_variable(0.0, Tensor::vector({3.0, 3.0}),
                                    Tensor::vector({-1.0, 2.0}));
    CHECK(e[0] == 0.0);
    CHECK(e[1] == 2.0);
  }
  SUBCASE("x=1 with zero bias rectifies the weights") {
    const Tensor e = embed_variable(1.0, Tensor::vector({1.0, -1.0}),
                                    Tensor::vector({0.0, 0.0}));
    CHECK(e[0] == 1.0);
    CHECK(e[1] == 0.0);
  }
  SUBCASE("random inputs match the scalar recomputation") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const double x = rng.uniform(-2.0, 2.0);
      const Tensor w = random_tensor(rng, {4});
      const Tensor b = random_tensor(rng, {4});
      const Tensor e = embed_variable(x, w, b);
      for (std::size_t i = 0; i < 4; ++i) {
        CHECK(e[i] == doctest::Approx(std::max(0.0, w[i] * x + b[i]))
                          .epsilon(1e-14));
      }
    }
  }
  SUBCASE("non-finite observations are rejected") {
    CHECK_THROWS_AS(embed_variable(std::nan(""), Tensor::vector({1.0}),
                                   Tensor::vector({0.0})),
                    Error);
  }
}

TEST_CASE("score_gat examples") {
  CHECK(score_gat(Tensor::vector({3, 4}), Tensor::vector({5, 6}),
                  Tensor::vector({1, 0}), Tensor::vector({0, 1}),
                  1.0) == doctest::Approx(9.0));
  CHECK(score_gat(Tensor::vector({7, -2}), Tensor::vector({1, 9}),
                  Tensor::vector({0, 0}), Tensor::vector({0, 0}),
                  0.3) == 0.0);
  CHECK(score_gat(Tensor::vector({-3, 0}), Tensor::vector({0, 1}),
                  Tensor::vector({1, 0}), Tensor::vector({0, 1}),
                  0.1) == doctest::Approx(-0.2));
}

TEST_CASE("score_gatv2 examples") {
  CHECK(score_gatv2(Tensor::vector({1, -2}), Tensor::vector({0.5, -1}),
                    Tensor::vector({1, 1}), 0.5) == doctest::Approx(0.0));

  Rng rng(17);
  SUBCASE("slope 1 reduces to a.(q+k)") {
    for (int trial = 0; trial < 30; ++trial) {
      const Tensor q = random_tensor(rng, {5});
      const Tensor k = random_tensor(rng, {5});
      const Tensor a = random_tensor(rng, {5});
      double expected = 0.0;
      for (std::size_t i = 0; i < 5; ++i) expected += a[i] * (q[i] + k[i]);
      CHECK(score_gatv2(q, k, a, 1.0) ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
  SUBCASE("random inputs match the scalar recomputation") {
    for (int trial = 0; trial < 30; ++trial) {
      const Tensor q = random_tensor(rng, {4});
      const Tensor k = random_tensor(rng, {4});
      const Tensor a = random_tensor(rng, {4});
      double expected = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        expected += a[i] * manual_leaky(q[i] + k[i], 0.2);
      }
      CHECK(score_gatv2(q, k, a, 0.2) ==
            doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("graph layer: single node gets weight exactly 1") {
  Rng rng(31);
  GraphAttentionLayer layer;
  layer.variant = AttentionVariant::gatv2;
  layer.alpha = 0.2;
  layer.w_query = random_tensor(rng, {3, 2});
  layer.b_query = random_tensor(rng, {3});
  layer.w_key = random_tensor(rng, {3, 2});
  layer.b_key = random_tensor(rng, {3});
  layer.attn_query = random_tensor(rng, {3});
  layer.w_msg = random_tensor(rng, {2, 2});
  layer.b_msg = random_tensor(rng, {2});

  const Tensor emb = random_tensor(rng, {1, 2});
  const auto [out, att] = graph_layer_forward(emb, layer);
  CHECK(att.weights[0] == 1.0);
  for (std::size_t i = 0; i < 2; ++i) {
    double expected = layer.b_msg[i];
    for (std::size_t j = 0; j < 2; ++j) {
      expected += layer.w_msg.at(i, j) * emb[j];
    }
    CHECK(out.at(0, i) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("graph layer: identical nodes get uniform weights") {
  Rng rng(37);
  for (const auto variant : {AttentionVariant::gat, AttentionVariant::gatv2}) {
    GraphAttentionLayer layer;
    layer.variant = variant;
    layer.alpha = 0.2;
    layer.w_query = random_tensor(rng, {3, 2});
    layer.b_query = random_tensor(rng, {3});
    if (variant == AttentionVariant::gatv2) {
      layer.w_key = random_tensor(rng, {3, 2});
      layer.b_key = random_tensor(rng, {3});
      layer.attn_query = random_tensor(rng, {3});
    } else {
      layer.attn_query = random_tensor(rng, {3});
      layer.attn_key = random_tensor(rng, {3});
    }
    layer.w_msg = random_tensor(rng, {2, 2});
    layer.b_msg = random_tensor(rng, {2});

    const Tensor row = random_tensor(rng, {2});
    const Tensor emb = Tensor::matrix(4, 2, {row[0], row[1], row[0], row[1],
                                             row[0], row[1], row[0], row[1]});
    const auto [out, att] = graph_layer_forward(emb, layer);
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(att.weights[i] == doctest::Approx(0.25).epsilon(1e-12));
    }
    // Uniform weights make the output the mean message; all rows equal.
    for (std::size_t i = 0; i < 2; ++i) {
      double msg = layer.b_msg[i];
      for (std::size_t j = 0; j < 2; ++j) msg += layer.w_msg.at(i, j) * row[j];
      for (std::size_t node = 0; node < 4; ++node) {
        CHECK(out.at(node, i) == doctest::Approx(msg).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("graph layer matches an independent scalar-loop recomputation") {
  Rng rng(41);
  for (const auto variant : {AttentionVariant::gat, AttentionVariant::gatv2}) {
    const std::size_t n = 3, e_dim = 2, a_dim = 3;
    GraphAttentionLayer layer;
    layer.variant = variant;
    layer.alpha = 0.2;
    layer.w_query = random_tensor(rng, {a_dim, e_dim});
    layer.b_query = random_tensor(rng, {a_dim});
    if (variant == AttentionVariant::gatv2) {
      layer.w_key = random_tensor(rng, {a_dim, e_dim});
      layer.b_key = random_tensor(rng, {a_dim});
      layer.attn_query = random_tensor(rng, {a_dim});
    } else {
      layer.attn_query = random_tensor(rng, {a_dim});
      layer.attn_key = random_tensor(rng, {a_dim});
    }
    layer.w_msg = random_tensor(rng, {e_dim, e_dim});
    layer.b_msg = random_tensor(rng, {e_dim});
    const Tensor emb = random_tensor(rng, {n, e_dim});

    const auto [out, att] = graph_layer_forward(emb, layer);

    // Brute-force oracle: plain loops, no shared kernels.
    const auto project = [&](const Tensor& w, const Tensor& b,
                             std::size_t node) {
      std::vector<double> v(a_dim);
      for (std::size_t i = 0; i < a_dim; ++i) {
        v[i] = b[i];
        for (std::size_t j = 0; j < e_dim; ++j) {
          v[i] += w.at(i, j) * emb.at(node, j);
        }
      }
      return v;
    };
    for (std::size_t recv = 0; recv < n; ++recv) {
      const auto q = project(layer.w_query, layer.b_query, recv);
      std::vector<double> scores(n);
      for (std::size_t send = 0; send < n; ++send) {
        const auto k = project(layer.key_weight(), layer.key_bias(), send);
        double s = 0.0;
        if (variant == AttentionVariant::gat) {
          double pre = 0.0;
          for (std::size_t i = 0; i < a_dim; ++i) {
            pre += layer.attn_query[i] * q[i] + layer.attn_key[i] * k[i];
          }
          s = manual_leaky(pre, layer.alpha);
        } else {
          for (std::size_t i = 0; i < a_dim; ++i) {
            s += layer.attn_query[i] * manual_leaky(q[i] + k[i], layer.alpha);
          }
        }
        scores[send] = s;
        CHECK(att.scores.at(recv, send) == doctest::Approx(s).epsilon(1e-12));
      }
      double denom = 0.0;
      std::vector<double> weights(n);
      for (std::size_t send = 0; send < n; ++send) {
        denom += std::exp(scores[send]);
      }
      for (std::size_t send = 0; send < n; ++send) {
        weights[send] = std::exp(scores[send]) / denom;
        CHECK(att.weights.at(recv, send) ==
              doctest::Approx(weights[send]).epsilon(1e-12));
      }
      for (std::size_t i = 0; i < e_dim; ++i) {
        double agg = 0.0;
        for (std::size_t send = 0; send < n; ++send) {
          double msg = layer.b_msg[i];
          for (std::size_t j = 0; j < e_dim; ++j) {
            msg += layer.w_msg.at(i, j) * emb.at(send, j);
          }
          agg += weights[send] * msg;
        }
        CHECK(out.at(recv, i) == doctest::Approx(agg).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("graph layer rejects non-matrix input") {
  GraphAttentionLayer layer;
  CHECK_THROWS_AS(graph_layer_forward(Tensor::vector({1.0}), layer), Error);
}

TEST_CASE("gru step: all-zero parameters halve a unit state") {
  GruParams p;
  p.w_update = Tensor::zeros({1, 2});
  p.u_update = Tensor::zeros({1, 1});
  p.b_update = Tensor::zeros({1});
  p.w_reset = p.w_update;
  p.u_reset = p.u_update;
  p.b_reset = p.b_update;
  p.w_cand = p.w_update;
  p.u_cand = p.u_update;
  p.b_cand = p.b_update;
  const Tensor h =
      gru_step(Tensor::vector({0.3, -0.7}), Tensor::vector({1.0}), p);
  CHECK(h[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("gru step: zero state and zero candidate input stay at zero") {
  Rng rng(43);
  GruParams p;
  p.w_update = random_tensor(rng, {2, 3});
  p.u_update = random_tensor(rng, {2, 2});
  p.b_update = Tensor::zeros({2});
  p.w_reset = random_tensor(rng, {2, 3});
  p.u_reset = random_tensor(rng, {2, 2});
  p.b_reset = Tensor::zeros({2});
  p.w_cand = Tensor::zeros({2, 3});
  p.u_cand = random_tensor(rng, {2, 2});
  p.b_cand = Tensor::zeros({2});
  const Tensor h = gru_step(random_tensor(rng, {3}), Tensor::zeros({2}), p);
  CHECK(h[0] == 0.0);
  CHECK(h[1] == 0.0);
}

TEST_CASE("gru step matches a scalar recomputation") {
  Rng rng(53);
  GruParams p;
  p.w_update = random_tensor(rng, {2, 3});
  p.u_update = random_tensor(rng, {2, 2});
  p.b_update = random_tensor(rng, {2});
  p.w_reset = random_tensor(rng, {2, 3});
  p.u_reset = random_tensor(rng, {2, 2});
  p.b_reset = random_tensor(rng, {2});
  p.w_cand = random_tensor(rng, {2, 3});
  p.u_cand = random_tensor(rng, {2, 2});
  p.b_cand = random_tensor(rng, {2});
  const Tensor x = random_tensor(rng, {3});
  const Tensor h0 = random_tensor(rng, {2});
  const Tensor h = gru_step(x, h0, p);

  const auto gate_pre = [&](const Tensor& w, const Tensor& u, const Tensor& b,
                            std::size_t i) {
    double acc = b[i];
    for (std::size_t j = 0; j < 3; ++j) acc += w.at(i, j) * x[j];
    for (std::size_t j = 0; j < 2; ++j) acc += u.at(i, j) * h0[j];
    return acc;
  };
  std::vector<double> r(2);
  for (std::size_t j = 0; j < 2; ++j) {
    r[j] = 1.0 / (1.0 + std::exp(-gate_pre(p.w_reset, p.u_reset, p.b_reset, j)));
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const double z =
        1.0 / (1.0 + std::exp(-gate_pre(p.w_update, p.u_update, p.b_update, i)));
    double cand_pre = p.b_cand[i];
    for (std::size_t j = 0; j < 3; ++j) cand_pre += p.w_cand.at(i, j) * x[j];
    for (std::size_t j = 0; j < 2; ++j) {
      cand_pre += p.u_cand.at(i, j) * (r[j] * h0[j]);
    }
    const double expected = (1.0 - z) * h0[i] + z * std::tanh(cand_pre);
    CHECK(h[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("gru step passes the gradient check") {
  Rng rng(47);
  std::vector<Tensor> params = {
      random_tensor(rng, {3, 4}), random_tensor(rng, {3, 3}),
      random_tensor(rng, {3}),    random_tensor(rng, {3, 4}),
      random_tensor(rng, {3, 3}), random_tensor(rng, {3}),
      random_tensor(rng, {3, 4}), random_tensor(rng, {3, 3}),
      random_tensor(rng, {3})};
  const Tensor input = random_tensor(rng, {4});
  const Tensor h_prev = random_tensor(rng, {3});

  const auto report = ad::finite_difference_check(
      [&](ad::Tape& t, std::span<const Tensor> p) {
        GruParams probe;
        probe.w_update = p[0];
        probe.u_update = p[1];
        probe.b_update = p[2];
        probe.w_reset = p[3];
        probe.u_reset = p[4];
        probe.b_reset = p[5];
        probe.w_cand = p[6];
        probe.u_cand = p[7];
        probe.b_cand = p[8];
        // The check compares against the tape cell, so rebuild it on the
        // caller's tape with trainable leaves in the same order.
        BoundModel b;
        b.gru_wz = t.param(p[0], 0);
        b.gru_uz = t.param(p[1], 1);
        b.gru_bz = t.param(p[2], 2);
        b.gru_wr = t.param(p[3], 3);
        b.gru_ur = t.param(p[4], 4);
        b.gru_br = t.param(p[5], 5);
        b.gru_wc = t.param(p[6], 6);
        b.gru_uc = t.param(p[7], 7);
        b.gru_bc = t.param(p[8], 8);
        const ad::ValueId ones = t.constant(Tensor::full({3}, 1.0));
        const ad::ValueId x = t.constant(input);
        const ad::ValueId h0 = t.constant(h_prev);
        const ad::ValueId z = t.sigmoid(t.add(
            t.add(t.matmul(b.gru_wz, x), t.matmul(b.gru_uz, h0)), b.gru_bz));
        const ad::ValueId rr = t.sigmoid(t.add(
            t.add(t.matmul(b.gru_wr, x), t.matmul(b.gru_ur, h0)), b.gru_br));
        const ad::ValueId cand = t.tanh(t.add(
            t.add(t.matmul(b.gru_wc, x), t.matmul(b.gru_uc, t.mul(rr, h0))),
            b.gru_bc));
        const ad::ValueId h = t.add(t.mul(t.sub(ones, z), h0), t.mul(z, cand));
        return t.mean(h);
      },
      params, 1e-5, 1e-4);
  CAPTURE(report.max_rel_err);
  CHECK(report.pass);
}

TEST_CASE("zero model predicts the output bias") {
  GarnnConfig cfg = small_config(AttentionVariant::gatv2, 3);
  GarnnModel model = GarnnModel::zeros(cfg);
  model.head.b_out = Tensor::vector({0.75});

  Rng rng(59);
  const MtsWindow w = random_window(rng, 3, 6);
  CHECK(model_forward(model, w).prediction ==
        doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("hand-sized model matches a scalar recomputation") {
  // N=1, T=1, L=1, all dims 1: the whole pipeline in plain doubles.
  GarnnConfig cfg;
  cfg.variant = AttentionVariant::gatv2;
  cfg.n_vars = 1;
  cfg.embed_dim = 1;
  cfg.attn_dim = 1;
  cfg.hidden_dim = 1;
  cfg.mlp_hidden = 1;
  cfg.layers = 1;
  cfg.alpha = 0.2;
  GarnnModel m = GarnnModel::zeros(cfg);
  m.embedding.weight = Tensor::matrix(1, 1, {2.0});
  m.embedding.bias = Tensor::matrix(1, 1, {0.1});
  auto& layer = m.layers[0];
  layer.w_query = Tensor::matrix(1, 1, {0.4});
  layer.b_query = Tensor::vector({0.0});
  layer.w_key = Tensor::matrix(1, 1, {-0.3});
  layer.b_key = Tensor::vector({0.05});
  layer.attn_query = Tensor::vector({0.9});
  layer.w_msg = Tensor::matrix(1, 1, {1.5});
  layer.b_msg = Tensor::vector({-0.2});
  m.gru.w_update = Tensor::matrix(1, 1, {0.6});
  m.gru.u_update = Tensor::matrix(1, 1, {0.3});
  m.gru.b_update = Tensor::vector({0.1});
  m.gru.w_reset = Tensor::matrix(1, 1, {-0.5});
  m.gru.u_reset = Tensor::matrix(1, 1, {0.2});
  m.gru.b_reset = Tensor::vector({0.0});
  m.gru.w_cand = Tensor::matrix(1, 1, {0.8});
  m.gru.u_cand = Tensor::matrix(1, 1, {-0.4});
  m.gru.b_cand = Tensor::vector({0.05});
  m.head.w_hidden = Tensor::matrix(1, 1, {1.2});
  m.head.b_hidden = Tensor::vector({0.3});
  m.head.w_out = Tensor::matrix(1, 1, {-0.7});
  m.head.b_out = Tensor::vector({0.25});

  const double x = 0.6;
  MtsWindow w;
  w.x = Tensor::matrix(1, 1, {x});
  w.target = 0.0;

  const double e0 = std::max(0.0, 2.0 * x + 0.1);
  const double e1 = 1.5 * e0 - 0.2;  // single node: weight exactly 1
  const double z = 1.0 / (1.0 + std::exp(-(0.6 * e1 + 0.1)));
  const double cand = std::tanh(0.8 * e1 + 0.05);  // r o h0 = 0
  const double h = z * cand;
  const double hidden = std::max(0.0, 1.2 * h + 0.3);
  const double expected = -0.7 * hidden + 0.25;

  CHECK(model_forward(m, w).prediction ==
        doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("forward pass is deterministic") {
  Rng rng(61);
  for (const auto variant : {AttentionVariant::gat, AttentionVariant::gatv2}) {
    const GarnnModel model = GarnnModel::init(small_config(variant, 4), 9);
    const MtsWindow w = random_window(rng, 4, 7);
    const double a = model_forward(model, w).prediction;
    const double b = model_forward(model, w).prediction;
    CHECK(a == b);
  }
}

TEST_CASE("window shape mismatches are rejected") {
  const GarnnModel model =
      GarnnModel::init(small_config(AttentionVariant::gatv2, 4), 1);
  Rng rng(67);
  CHECK_THROWS_AS(model_forward(model, random_window(rng, 3, 7)), Error);
}

TEST_CASE("attention rows always sum to 1") {
  Rng rng(71);
  for (int trial = 0; trial < 25; ++trial) {
    const auto variant =
        trial % 2 == 0 ? AttentionVariant::gat : AttentionVariant::gatv2;
    const std::size_t n = 1 + rng.uniform_index(5);
    const GarnnModel model = GarnnModel::init(
        small_config(variant, n, 1 + trial % 2), 1000 + trial);
    const MtsWindow w = random_window(rng, n, 5);
    const auto fwd = model_forward(model, w, TraceLevel::attention);
    for (const auto& step : fwd.trace.steps) {
      for (const auto& att : step) {
        for (std::size_t recv = 0; recv < n; ++recv) {
          double sum = 0.0;
          for (std::size_t send = 0; send < n; ++send) {
            sum += att.weights.at(recv, send);
            CHECK(att.weights.at(recv, send) >= 0.0);
          }
          CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
      }
    }
  }
}

TEST_CASE("permuting variables and wiring together leaves the prediction put") {
  Rng rng(73);
  const std::size_t n = 4;
  const GarnnConfig cfg = small_config(AttentionVariant::gatv2, n);
  const GarnnModel model = GarnnModel::init(cfg, 21);
  const MtsWindow w = random_window(rng, n, 6);
  const double base = model_forward(model, w).prediction;

  // new index p reads old index perm[p]
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  GarnnModel permuted = model;

  const auto permute_rows = [&](const Tensor& t) {
    const std::size_t cols = t.shape()[1];
    std::vector<double> data(t.size());
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t c = 0; c < cols; ++c) {
        data[p * cols + c] = t.at(perm[p], c);
      }
    }
    return Tensor(t.shape(), data);
  };
  permuted.embedding.weight = permute_rows(model.embedding.weight);
  permuted.embedding.bias = permute_rows(model.embedding.bias);

  // GRU input columns follow the concatenation order: permute blockwise.
  const std::size_t e_dim = cfg.embed_dim;
  const auto permute_blocks = [&](const Tensor& t) {
    const std::size_t rows = t.shape()[0];
    const std::size_t cols = t.shape()[1];
    std::vector<double> data(t.size());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t c = 0; c < e_dim; ++c) {
          data[r * cols + p * e_dim + c] = t.at(r, perm[p] * e_dim + c);
        }
      }
    }
    return Tensor(t.shape(), data);
  };
  permuted.gru.w_update = permute_blocks(model.gru.w_update);
  permuted.gru.w_reset = permute_blocks(model.gru.w_reset);
  permuted.gru.w_cand = permute_blocks(model.gru.w_cand);

  MtsWindow permuted_window = w;
  {
    const std::size_t t_len = w.x.shape()[1];
    std::vector<double> data(w.x.size());
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t t = 0; t < t_len; ++t) {
        data[p * t_len + t] = w.x.at(perm[p], t);
      }
    }
    permuted_window.x = Tensor(w.x.shape(), data);
  }

  const auto fwd = model_forward(permuted, permuted_window, TraceLevel::full);
  CHECK(fwd.prediction == doctest::Approx(base).epsilon(1e-10));

  // Per-variable outputs permute identically: compare traced keys.
  const auto base_fwd = model_forward(model, w, TraceLevel::full);
  for (std::size_t t = 0; t < fwd.trace.steps.size(); ++t) {
    const Tensor& k_perm = fwd.trace.steps[t][0].keys;
    const Tensor& k_base = base_fwd.trace.steps[t][0].keys;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t d = 0; d < k_base.shape()[1]; ++d) {
        CHECK(k_perm.at(p, d) ==
              doctest::Approx(k_base.at(perm[p], d)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("static scoring: linearized sender order is receiver-independent") {
  Rng rng(79);
  for (int trial = 0; trial < 50; ++trial) {
    const auto variant =
        trial % 2 == 0 ? AttentionVariant::gat : AttentionVariant::gatv2;
    const std::size_t n = 2 + rng.uniform_index(4);
    const GarnnModel model =
        GarnnModel::init(small_config(variant, n), 500 + trial);
    const MtsWindow w = random_window(rng, n, 3);
    const auto fwd = model_forward(model, w, TraceLevel::full);

    for (const auto& step : fwd.trace.steps) {
      const auto& att = step[0];
      const auto& layer = model.layers[0];
      std::vector<double> send_term(n);
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t d = 0; d < att.keys.shape()[1]; ++d) {
          acc += layer.key_attention()[d] * att.keys.at(j, d);
        }
        send_term[j] = acc;
      }
      std::vector<std::size_t> reference(n);
      std::iota(reference.begin(), reference.end(), 0);
      std::stable_sort(reference.begin(), reference.end(),
                       [&](std::size_t a, std::size_t b) {
                         return send_term[a] > send_term[b];
                       });
      // The sender ranking must order every receiver's linearized row
      // (exact comparisons; rounding ties are compatible, inversions not).
      for (std::size_t recv = 0; recv < n; ++recv) {
        double recv_term = 0.0;
        for (std::size_t d = 0; d < att.queries.shape()[1]; ++d) {
          recv_term += layer.query_attention()[d] * att.queries.at(recv, d);
        }
        std::vector<double> row(n);
        for (std::size_t j = 0; j < n; ++j) row[j] = recv_term + send_term[j];
        for (std::size_t i = 0; i + 1 < n; ++i) {
          CHECK(row[reference[i]] >= row[reference[i + 1]]);
        }
      }
    }
  }
}

TEST_CASE("dynamic scoring witness: receivers can prefer different senders") {
  // GATv2 with alpha = 0: receiver 0 prefers sender 0 while receiver 1
  // prefers sender 1 on the post-LeakyReLU scores.
  GraphAttentionLayer layer;
  layer.variant = AttentionVariant::gatv2;
  layer.alpha = 0.0;
  layer.w_query = Tensor::matrix(2, 2, {0, -10, -10, 0});
  layer.b_query = Tensor::zeros({2});
  layer.w_key = Tensor::matrix(2, 2, {2, 0, 0, 3});
  layer.b_key = Tensor::zeros({2});
  layer.attn_query = Tensor::vector({1.0, 1.0});
  layer.w_msg = Tensor::matrix(2, 2, {1, 0, 0, 1});
  layer.b_msg = Tensor::zeros({2});

  const Tensor emb = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const auto [out, att] = graph_layer_forward(emb, layer);

  CHECK(att.scores.at(0, 0) > att.scores.at(0, 1));
  CHECK(att.scores.at(1, 1) > att.scores.at(1, 0));
}

TEST_CASE("model_forward gradient passes finite differences (3 vars, T=4)") {
  Rng rng(83);
  for (const auto variant : {AttentionVariant::gat, AttentionVariant::gatv2}) {
    GarnnConfig cfg = small_config(variant, 3, 2);
    const GarnnModel model = GarnnModel::init(cfg, 77);
    const MtsWindow w = random_window(rng, 3, 4);

    const auto report = ad::finite_difference_check(
        [&](ad::Tape& tape, std::span<const Tensor> params) {
          GarnnModel probe = model;
          probe.set_parameters(params);
          const BoundModel bound = bind_model(tape, probe, /*trainable=*/true);
          return model_forward_on(tape, bound, w.x);
        },
        model.parameters(), 1e-5, 1e-4);
    CAPTURE(variant_name(variant));
    CAPTURE(report.max_rel_err);
    CHECK(report.pass);
  }
}

TEST_CASE("parameter sharing follows the variant") {
  const GarnnModel gat =
      GarnnModel::init(small_config(AttentionVariant::gat, 3), 5);
  CHECK(gat.layers[0].w_key.empty());
  CHECK(&gat.layers[0].key_weight() == &gat.layers[0].w_query);
  CHECK_FALSE(gat.layers[0].attn_key.empty());

  const GarnnModel v2 =
      GarnnModel::init(small_config(AttentionVariant::gatv2, 3), 5);
  CHECK_FALSE(v2.layers[0].w_key.empty());
  CHECK(v2.layers[0].attn_key.empty());
  CHECK(&v2.layers[0].key_attention() == &v2.layers[0].attn_query);

  // Enumeration counts: GAT shares the projection, GATv2 the vector.
  CHECK(gat.param_count() == 2 + 6 + 9 + 4);
  CHECK(v2.param_count() == 2 + 7 + 9 + 4);
}

TEST_CASE("model config validation") {
  GarnnConfig cfg = small_config(AttentionVariant::gatv2, 2);
  cfg.alpha = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.alpha = 0.2;
  cfg.layers = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
