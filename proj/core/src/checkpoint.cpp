#include "garnn/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <map>

#include <json.hpp>

#include "garnn/error.hpp"

namespace garnn {

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kFormatName = "garnn-checkpoint";

using nlohmann::json;

json doubles_to_json(std::span<const double> values) {
  json out = json::array();
  for (double v : values) out.push_back(double_to_hex(v));
  return out;
}

std::vector<double> doubles_from_json(const json& arr) {
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& item : arr) out.push_back(hex_to_double(item.get<std::string>()));
  return out;
}

}  // namespace

std::string double_to_hex(double value) {
  char buf[48];
  const auto res =
      std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::hex);
  return std::string(buf, res.ptr);
}

double hex_to_double(const std::string& text) {
  double out;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), out,
                                   std::chars_format::hex);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    fail(ErrorCode::io, "bad hex float '" + text + "' in checkpoint");
  }
  return out;
}

void save_checkpoint(const GarnnModel& model, const CheckpointMeta& meta,
                     const std::string& path) {
  json doc;
  doc["format"] = kFormatName;
  doc["version"] = kFormatVersion;

  const GarnnConfig& cfg = model.config;
  doc["arch"] = {
      {"variant", variant_name(cfg.variant)},
      {"n_vars", cfg.n_vars},
      {"embed_dim", cfg.embed_dim},
      {"attn_dim", cfg.attn_dim},
      {"hidden_dim", cfg.hidden_dim},
      {"layers", cfg.layers},
      {"mlp_hidden", cfg.mlp_hidden},
      {"alpha", double_to_hex(cfg.alpha)},
  };
  doc["data"] = {
      {"variables", meta.variables},
      {"window_len", meta.window_len},
      {"horizon", meta.horizon},
      {"dt_minutes", double_to_hex(meta.dt_minutes)},
      {"split", {{"train", double_to_hex(meta.split.train)},
                 {"validation", double_to_hex(meta.split.validation)},
                 {"test", double_to_hex(meta.split.test)}}},
      {"normalizer", {{"mean", doubles_to_json(meta.norm_means)},
                      {"std", doubles_to_json(meta.norm_stds)}}},
  };
  doc["seed"] = meta.seed;

  json params = json::object();
  model.for_each_param([&](const std::string& name, const Tensor& t) {
    params[name] = {{"shape", t.shape()}, {"data", doubles_to_json(t.data())}};
  });
  doc["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << doc.dump(1) << '\n';
  if (!out) fail(ErrorCode::io, "write failed for " + path);
}

std::pair<GarnnModel, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    fail(ErrorCode::io, path + ": not valid JSON: " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormatName) {
      fail(ErrorCode::io, path + ": not a checkpoint file");
    }
    if (doc.at("version").get<int>() != kFormatVersion) {
      fail(ErrorCode::io,
           path + ": unsupported checkpoint version " +
               std::to_string(doc.at("version").get<int>()));
    }

    const json& arch = doc.at("arch");
    GarnnConfig cfg;
    cfg.variant = parse_variant(arch.at("variant").get<std::string>());
    cfg.n_vars = arch.at("n_vars").get<std::size_t>();
    cfg.embed_dim = arch.at("embed_dim").get<std::size_t>();
    cfg.attn_dim = arch.at("attn_dim").get<std::size_t>();
    cfg.hidden_dim = arch.at("hidden_dim").get<std::size_t>();
    cfg.layers = arch.at("layers").get<std::size_t>();
    cfg.mlp_hidden = arch.at("mlp_hidden").get<std::size_t>();
    cfg.alpha = hex_to_double(arch.at("alpha").get<std::string>());

    const json& data = doc.at("data");
    CheckpointMeta meta;
    meta.variables = data.at("variables").get<std::vector<std::string>>();
    meta.window_len = data.at("window_len").get<std::size_t>();
    meta.horizon = data.at("horizon").get<std::size_t>();
    meta.dt_minutes = hex_to_double(data.at("dt_minutes").get<std::string>());
    meta.split.train = hex_to_double(data.at("split").at("train").get<std::string>());
    meta.split.validation =
        hex_to_double(data.at("split").at("validation").get<std::string>());
    meta.split.test = hex_to_double(data.at("split").at("test").get<std::string>());
    meta.norm_means = doubles_from_json(data.at("normalizer").at("mean"));
    meta.norm_stds = doubles_from_json(data.at("normalizer").at("std"));
    meta.seed = doc.at("seed").get<std::uint64_t>();

    GarnnModel model = GarnnModel::zeros(cfg);
    const json& params = doc.at("params");
    std::size_t assigned = 0;
    model.for_each_param([&](const std::string& name, Tensor& t) {
      const auto it = params.find(name);
      if (it == params.end()) {
        fail(ErrorCode::io, path + ": missing parameter '" + name + "'");
      }
      const auto shape = it->at("shape").get<std::vector<std::size_t>>();
      if (shape != t.shape()) {
        fail(ErrorCode::shape_mismatch,
             path + ": parameter '" + name + "' has shape " +
                 Tensor::shape_str(shape) + ", expected " + t.shape_str());
      }
      t = Tensor(shape, doubles_from_json(it->at("data")));
      ++assigned;
    });
    if (assigned != params.size()) {
      fail(ErrorCode::io, path + ": checkpoint has " +
                              std::to_string(params.size()) +
                              " parameters, model expects " +
                              std::to_string(assigned));
    }
    return {std::move(model), std::move(meta)};
  } catch (const json::exception& e) {
    fail(ErrorCode::io, path + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace garnn
