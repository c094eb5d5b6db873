#pragma once

#include <memory>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace groundnet {

struct ModelConfig {
  std::string kind = "trnetattn";  // trnetattn | trnet | tcnn | tuvfa | tvgg
  std::string task = "regression";  // regression | classification
  // grid tasks
  int map_m = 10;
  int map_n = 10;
  int k = 7;
  int a1 = 10;
  int a2 = 10;
  int entity_table = 22;
  // text
  int vocab_size = 0;
  int embed_dim = 15;
  int hidden_dim = 30;
  int max_len = 40;
  // pixel tasks
  int image_size = 64;
  std::vector<int> pixel_channels = {8, 8};  // stride-2 stack before k
  // t-CNN
  int tcnn_filter = 3;
  // t-UVFA
  int uvfa_channels = 8;
  int uvfa_text_dim = 7;
  int uvfa_deconv_kernel = 4;
  // t-VGG
  std::vector<int> vgg_channels = {16, 32, 32, 32};
  int vgg_dense = 512;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& json_text);

  // Spatial size of the pixel-path cell grid (stride-2 convs down to k).
  int pixel_grid() const {
    int g = image_size;
    for (size_t i = 0; i < pixel_channels.size() + 1; ++i) g /= 2;
    return g;
  }
};

// Per-instance byproducts of a forward pass, for interpretability dumps and
// tests. Callers set probe_i/probe_j (cell indices) before the pass to
// capture that pair's attention row.
struct ForwardTrace {
  int m = 0, n = 0;
  Vec z1;
  Vec z2;
  Vec value;
  Vec scores;               // per directed pair
  std::vector<int> pair_i;  // scoring cell per pair
  std::vector<int> pair_j;  // neighbor cell per pair
  Vec probs;                // classification probabilities
  int probe_i = -1;
  int probe_j = -1;
  Vec probe_alpha;
};

class Model {
 public:
  virtual ~Model() = default;

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // Grid observation (entity ids, row-major map_m x map_n) -> value map.
  virtual Var value_map(Tape& tape, const std::vector<int>& obs,
                        const std::vector<int>& tokens,
                        ForwardTrace* trace = nullptr) const;
  // Pixel observation -> 2-class logits.
  virtual Var class_logits(Tape& tape, const Vec& image,
                           const std::vector<int>& tokens,
                           ForwardTrace* trace = nullptr) const;

 protected:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {}
  ModelConfig cfg_;
  ParamStore store_;
};

std::unique_ptr<Model> create_model(const ModelConfig& cfg, uint64_t seed);

void save_model(const Model& model, const std::string& path);
std::unique_ptr<Model> load_model(const std::string& path);

}  // namespace groundnet
