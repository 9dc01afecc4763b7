#include <benchmark/benchmark.h>

#include "garnn/grad_check.hpp"
#include "garnn/model.hpp"
#include "garnn/rng.hpp"
#include "garnn/tape.hpp"

using namespace garnn;

namespace {

GarnnConfig default_arch(std::size_t n_vars, std::size_t layers) {
  GarnnConfig cfg;
  cfg.n_vars = n_vars;
  cfg.layers = layers;
  return cfg;  // E=8, A=8, D=128, mlp 64, gatv2
}

MtsWindow make_window(std::size_t n_vars, std::size_t window_len,
                      std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> data(n_vars * window_len);
  for (double& v : data) v = rng.uniform(-1.5, 1.5);
  MtsWindow w;
  w.x = Tensor({n_vars, window_len}, std::move(data));
  w.target = rng.uniform(-1.0, 1.0);
  return w;
}

void BM_ModelForward(benchmark::State& state) {
  const auto layers = static_cast<std::size_t>(state.range(0));
  const GarnnModel model = GarnnModel::init(default_arch(6, layers), 1);
  const MtsWindow w = make_window(6, 48, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model_forward(model, w).prediction);
  }
}
BENCHMARK(BM_ModelForward)->Arg(1)->Arg(2);

void BM_ModelForwardBackward(benchmark::State& state) {
  const auto layers = static_cast<std::size_t>(state.range(0));
  const GarnnModel model = GarnnModel::init(default_arch(6, layers), 1);
  const MtsWindow w = make_window(6, 48, 2);
  for (auto _ : state) {
    ad::Tape tape;
    tape.reserve(64 * 48);
    const BoundModel bound = bind_model(tape, model, true);
    const ad::ValueId loss = example_loss_on(tape, bound, w);
    benchmark::DoNotOptimize(tape.backward(loss));
  }
}
BENCHMARK(BM_ModelForwardBackward)->Arg(1)->Arg(2);

void BM_GraphLayer(benchmark::State& state) {
  const GarnnModel model = GarnnModel::init(default_arch(6, 1), 1);
  Rng rng(3);
  std::vector<double> emb(6 * 8);
  for (double& v : emb) v = rng.uniform(-1.0, 1.0);
  const Tensor embeddings({6, 8}, emb);
  for (auto _ : state) {
    benchmark::DoNotOptimize(graph_layer_forward(embeddings, model.layers[0]));
  }
}
BENCHMARK(BM_GraphLayer);

void BM_GruStep(benchmark::State& state) {
  const GarnnModel model = GarnnModel::init(default_arch(6, 1), 1);
  Rng rng(4);
  std::vector<double> in(48), h(128);
  for (double& v : in) v = rng.uniform(-1.0, 1.0);
  for (double& v : h) v = rng.uniform(-1.0, 1.0);
  const Tensor input = Tensor::vector(in);
  const Tensor state_prev = Tensor::vector(h);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gru_step(input, state_prev, model.gru));
  }
}
BENCHMARK(BM_GruStep);

void BM_TraceCapture(benchmark::State& state) {
  const GarnnModel model = GarnnModel::init(default_arch(6, 1), 1);
  const MtsWindow w = make_window(6, 48, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model_forward(model, w, TraceLevel::full));
  }
}
BENCHMARK(BM_TraceCapture);

}  // namespace

BENCHMARK_MAIN();
