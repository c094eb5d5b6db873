#pragma once

#include "model.hpp"
#include "text_encoder.hpp"

namespace groundnet {

// Scalar encoding for the relative location of a neighboring cell: the 8
// offsets (dr, dc) in {-1,0,1}^2 minus the origin, enumerated row-major,
// mapped to index/7 in [0, 1].
double l_encoding(int dr, int dc);

// Directed cell pairs of the 8-neighborhood (self excluded, out-of-bounds
// skipped). Pairs are ordered by scoring cell, then by offset enumeration.
struct PairLayout {
  std::vector<int> i_cell;
  std::vector<int> j_cell;
  std::vector<int> segment;  // == i_cell
  Vec l;
  int count = 0;
};

PairLayout build_pair_layout(int m, int n);

// t-RNetAttn and its no-attention ablation (t-RNet): observation embedding,
// per-pair dynamic relation scores, max-pooled relation map Z1, gradient map
// Z2, and the task head.
class RNetModel : public Model {
 public:
  RNetModel(ModelConfig cfg, uint64_t seed);
  RNetModel(ModelConfig cfg, const ParamStore& loaded);

  Var value_map(Tape& tape, const std::vector<int>& obs,
                const std::vector<int>& tokens,
                ForwardTrace* trace = nullptr) const override;
  Var class_logits(Tape& tape, const Vec& image,
                   const std::vector<int>& tokens,
                   ForwardTrace* trace = nullptr) const override;

  // Grid-path observation encoding: one embedding row per cell (mn x k).
  Var observation_embedding(Tape& tape, const std::vector<int>& obs) const;

  bool attention_enabled() const { return attention_; }
  const TextEncoder& text_encoder() const { return *encoder_; }
  int obs_embedding_param() const { return obs_embedding_; }

 private:
  void init_params(uint64_t seed);
  void bind_params();
  // Shared relation pipeline: phi (cells x k) -> Z1 (m x n).
  Var relation_map(Tape& tape, Var phi, const PairLayout& layout, int m, int n,
                   Var states, ForwardTrace* trace) const;
  Var pixel_features(Tape& tape, const Vec& image) const;  // grid x grid x k

  bool attention_ = true;
  std::unique_ptr<TextEncoder> encoder_;
  int obs_embedding_ = -1;
  std::vector<int> pixel_conv_;
  std::vector<int> pixel_bias_;
  int head_conv_ = -1;
  int head_conv_bias_ = -1;
  int head_linear_ = -1;
  int head_linear_bias_ = -1;
  PairLayout grid_pairs_;
  PairLayout pixel_pairs_;
};

// Single-pair relation score r = W3 tanh(W2 tanh(W1 [phi_i; phi_j; l])),
// with weights decoded for this exact pair.
double relation_score(const Vec& phi_i, const Vec& phi_j, double l_ij,
                      const RNetParams& params);

}  // namespace groundnet
