#include "model.hpp"

#include <json.hpp>

#include "baselines.hpp"
#include "checkpoint.hpp"
#include "rnet.hpp"

namespace groundnet {

using nlohmann::json;

std::string ModelConfig::to_json() const {
  json j;
  j["kind"] = kind;
  j["task"] = task;
  j["map_m"] = map_m;
  j["map_n"] = map_n;
  j["k"] = k;
  j["a1"] = a1;
  j["a2"] = a2;
  j["entity_table"] = entity_table;
  j["vocab_size"] = vocab_size;
  j["embed_dim"] = embed_dim;
  j["hidden_dim"] = hidden_dim;
  j["max_len"] = max_len;
  j["image_size"] = image_size;
  j["pixel_channels"] = pixel_channels;
  j["tcnn_filter"] = tcnn_filter;
  j["uvfa_channels"] = uvfa_channels;
  j["uvfa_text_dim"] = uvfa_text_dim;
  j["uvfa_deconv_kernel"] = uvfa_deconv_kernel;
  j["vgg_channels"] = vgg_channels;
  j["vgg_dense"] = vgg_dense;
  return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json_text) {
  json j = json::parse(json_text);
  ModelConfig c;
  c.kind = j.value("kind", c.kind);
  c.task = j.value("task", c.task);
  c.map_m = j.value("map_m", c.map_m);
  c.map_n = j.value("map_n", c.map_n);
  c.k = j.value("k", c.k);
  c.a1 = j.value("a1", c.a1);
  c.a2 = j.value("a2", c.a2);
  c.entity_table = j.value("entity_table", c.entity_table);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.max_len = j.value("max_len", c.max_len);
  c.image_size = j.value("image_size", c.image_size);
  c.pixel_channels = j.value("pixel_channels", c.pixel_channels);
  c.tcnn_filter = j.value("tcnn_filter", c.tcnn_filter);
  c.uvfa_channels = j.value("uvfa_channels", c.uvfa_channels);
  c.uvfa_text_dim = j.value("uvfa_text_dim", c.uvfa_text_dim);
  c.uvfa_deconv_kernel = j.value("uvfa_deconv_kernel", c.uvfa_deconv_kernel);
  c.vgg_channels = j.value("vgg_channels", c.vgg_channels);
  c.vgg_dense = j.value("vgg_dense", c.vgg_dense);
  return c;
}

std::unique_ptr<Model> create_model(const ModelConfig& cfg, uint64_t seed) {
  if (cfg.kind == "trnetattn" || cfg.kind == "trnet") {
    return std::make_unique<RNetModel>(cfg, seed);
  }
  if (cfg.kind == "tcnn") return std::make_unique<TCnnModel>(cfg, seed);
  if (cfg.kind == "tuvfa") return std::make_unique<TUvfaModel>(cfg, seed);
  if (cfg.kind == "tvgg") return std::make_unique<TVggModel>(cfg, seed);
  throw ConfigError("unknown model kind '" + cfg.kind + "'");
}

void save_model(const Model& model, const std::string& path) {
  save_checkpoint(path, model.config().kind, model.config().to_json(),
                  model.params());
}

std::unique_ptr<Model> load_model(const std::string& path) {
  LoadedCheckpoint ckpt = load_checkpoint(path);
  ModelConfig cfg = ModelConfig::from_json(ckpt.config_json);
  if (cfg.kind != ckpt.kind) {
    throw IoError("checkpoint kind '" + ckpt.kind +
                  "' disagrees with its config ('" + cfg.kind + "')");
  }
  if (cfg.kind == "trnetattn" || cfg.kind == "trnet") {
    return std::make_unique<RNetModel>(cfg, ckpt.params);
  }
  if (cfg.kind == "tcnn") {
    return std::make_unique<TCnnModel>(cfg, ckpt.params);
  }
  if (cfg.kind == "tuvfa") {
    return std::make_unique<TUvfaModel>(cfg, ckpt.params);
  }
  if (cfg.kind == "tvgg") {
    return std::make_unique<TVggModel>(cfg, ckpt.params);
  }
  throw IoError("checkpoint with unknown model kind '" + ckpt.kind + "'");
}

}  // namespace groundnet
