#include <cmath>
#include <cstdio>
#include <fstream>

#include <doctest.h>

#include "garnn/checkpoint.hpp"
#include "garnn/config.hpp"
#include "garnn/error.hpp"
#include "garnn/manifest.hpp"
#include "garnn/model.hpp"
#include "garnn/rng.hpp"
#include "garnn/svg.hpp"
#include "test_util.hpp"

using namespace garnn;

namespace {

std::string temp_path(const std::string& name) {
  return std::string("/tmp/garnn_io_") + name;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

CheckpointMeta sample_meta(const GarnnConfig& cfg) {
  CheckpointMeta meta;
  meta.variables = {"glucose", "meal", "bolus"};
  meta.variables.resize(cfg.n_vars, "pad");
  meta.window_len = 48;
  meta.horizon = 6;
  meta.dt_minutes = 5.0;
  meta.norm_means = std::vector<double>(cfg.n_vars, 0.1234567890123456789);
  meta.norm_stds = std::vector<double>(cfg.n_vars, 31.9876543210987654321);
  meta.seed = 17;
  return meta;
}

}  // namespace

TEST_CASE("hex float round trip is bit-exact") {
  Rng rng(401);
  for (int i = 0; i < 2000; ++i) {
    const double x =
        rng.normal(0, 1) * std::pow(10.0, rng.uniform(-30.0, 30.0));
    CHECK(hex_to_double(double_to_hex(x)) == x);
  }
  CHECK(hex_to_double(double_to_hex(0.0)) == 0.0);
  CHECK(std::signbit(hex_to_double(double_to_hex(-0.0))));
}

TEST_CASE("checkpoint round trip restores every bit") {
  Rng rng(409);
  for (const auto variant : {AttentionVariant::gat, AttentionVariant::gatv2}) {
    GarnnConfig cfg;
    cfg.variant = variant;
    cfg.n_vars = 3;
    cfg.embed_dim = 4;
    cfg.attn_dim = 3;
    cfg.hidden_dim = 6;
    cfg.mlp_hidden = 5;
    cfg.layers = 2;
    cfg.alpha = 0.2;
    const GarnnModel model = GarnnModel::init(cfg, rng.next_u64());
    const CheckpointMeta meta = sample_meta(cfg);

    const std::string path = temp_path("ckpt.json");
    save_checkpoint(model, meta, path);
    const auto [loaded, loaded_meta] = load_checkpoint(path);

    CHECK(loaded.config.variant == cfg.variant);
    CHECK(loaded.config.layers == cfg.layers);
    CHECK(loaded_meta.variables == meta.variables);
    CHECK(loaded_meta.window_len == meta.window_len);
    CHECK(loaded_meta.seed == meta.seed);
    for (std::size_t v = 0; v < cfg.n_vars; ++v) {
      CHECK(loaded_meta.norm_means[v] == meta.norm_means[v]);
      CHECK(loaded_meta.norm_stds[v] == meta.norm_stds[v]);
    }

    const auto a = model.parameters();
    const auto b = loaded.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t p = 0; p < a.size(); ++p) {
      REQUIRE(a[p].same_shape(b[p]));
      for (std::size_t i = 0; i < a[p].size(); ++i) {
        CHECK(a[p][i] == b[p][i]);
      }
    }
  }
}

TEST_CASE("checkpoint rejects foreign or damaged files") {
  const std::string path = temp_path("bad.json");
  write_file(path, "{\"format\":\"something-else\",\"version\":1}");
  CHECK_THROWS_AS(load_checkpoint(path), Error);

  write_file(path, "not json at all");
  CHECK_THROWS_AS(load_checkpoint(path), Error);

  // remove one parameter from a valid checkpoint
  GarnnConfig cfg;
  cfg.n_vars = 2;
  cfg.embed_dim = 2;
  cfg.attn_dim = 2;
  cfg.hidden_dim = 2;
  cfg.mlp_hidden = 2;
  const GarnnModel model = GarnnModel::init(cfg, 1);
  const std::string good = temp_path("good.json");
  save_checkpoint(model, sample_meta(cfg), good);
  std::string text = read_file(good);
  const auto pos = text.find("\"gru.update.bias\"");
  REQUIRE(pos != std::string::npos);
  // damage the name so lookup fails
  text.replace(pos, 17, "\"gru.update.bia_\"");
  write_file(path, text);
  CHECK_THROWS_AS(load_checkpoint(path), Error);
}

TEST_CASE("kv config parses files with comments and overrides") {
  const std::string path = temp_path("config.txt");
  write_file(path,
             "# training settings\n"
             "train.learning_rate = 1e-3\n"
             "train.batch_size=32   # inline comment\n"
             "model.variant = gatv2\n"
             "\n"
             "data.days = 14\n");
  KvConfig cfg = KvConfig::load(path);
  CHECK(cfg.get_double("train.learning_rate", 0) == 1e-3);
  CHECK(cfg.get_int("train.batch_size", 0) == 32);
  CHECK(cfg.get_string("model.variant", "") == "gatv2");
  CHECK(cfg.get_int("data.days", 0) == 14);
  CHECK(cfg.get_int("absent", 7) == 7);

  cfg.set_pair("train.batch_size=64");
  CHECK(cfg.get_int("train.batch_size", 0) == 64);

  CHECK_THROWS_AS(cfg.set_pair("no_equals_sign"), Error);
  CHECK_THROWS_AS(cfg.get_int("model.variant", 0), Error);
}

TEST_CASE("kv config rejects malformed lines") {
  const std::string path = temp_path("bad_config.txt");
  write_file(path, "just a line without equals\n");
  CHECK_THROWS_AS(KvConfig::load(path), Error);
}

TEST_CASE("a run manifest is accepted as a config") {
  const std::string manifest_path = temp_path("manifest.json");
  RunManifest manifest;
  manifest.command = "train";
  manifest.seed = 9;
  manifest.config["train.learning_rate"] = "0.001";
  manifest.config["model.variant"] = "gat";
  manifest.write(manifest_path);

  const KvConfig cfg = KvConfig::load(manifest_path);
  CHECK(cfg.get_double("train.learning_rate", 0) == 0.001);
  CHECK(cfg.get_string("model.variant", "") == "gat");
}

TEST_CASE("unknown keys are rejected when a schema is enforced") {
  KvConfig cfg;
  cfg.set("train.learning_rate", "1e-3");
  cfg.set("tran.learning_rate", "1e-3");  // typo
  const std::vector<std::string> known = {"train.learning_rate"};
  CHECK_THROWS_AS(cfg.require_known(known), Error);
}

TEST_CASE("file hashes are stable and content-sensitive") {
  const std::string a = temp_path("hash_a.txt");
  const std::string b = temp_path("hash_b.txt");
  write_file(a, "same content");
  write_file(b, "same content");
  CHECK(hash_file_hex(a) == hash_file_hex(b));
  write_file(b, "different content");
  CHECK(hash_file_hex(a) != hash_file_hex(b));
  CHECK(hash_file_hex(a).rfind("fnv1a64:", 0) == 0);
}

TEST_CASE("svg heatmap has one rect per cell plus background") {
  garnn::Tensor map = garnn::Tensor::matrix(2, 3, {0.0, 0.5, 1.0,
                                                   0.25, 0.75, 0.9});
  const std::vector<std::string> labels = {"glucose", "meal"};
  HeatmapSpec spec;
  spec.title = "variant=gatv2 L=1 alpha=0.2";
  const std::string path = temp_path("map.svg");
  write_heatmap_svg(map, labels, spec, path);

  const std::string text = read_file(path);
  std::size_t rects = 0;
  for (std::size_t pos = text.find("<rect"); pos != std::string::npos;
       pos = text.find("<rect", pos + 1)) {
    ++rects;
  }
  CHECK(rects == 7);  // 6 cells + background
  CHECK(text.find("glucose") != std::string::npos);
  CHECK(text.find("alpha=0.2") != std::string::npos);
  // black at 0, near-white at 1
  CHECK(text.find("rgb(15,15,15)") != std::string::npos);
  CHECK(text.find("rgb(250,250,250)") != std::string::npos);
}

TEST_CASE("heatmap rejects mismatched labels") {
  garnn::Tensor map = garnn::Tensor::matrix(2, 2, {0, 0, 0, 0});
  const std::vector<std::string> labels = {"only-one"};
  CHECK_THROWS_AS(write_heatmap_svg(map, labels, HeatmapSpec{}, "/tmp/x.svg"),
                  Error);
}
