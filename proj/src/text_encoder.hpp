#pragma once

#include <string>
#include <vector>

#include "tensor.hpp"

namespace groundnet {

// Length of the decoded dynamic parameter vector:
// (2k+1)*a1 weights for the first relation layer, a1*a2 for the second,
// a2 for the output layer, plus the three gradient-map coefficients.
int param_size(int k, int a1, int a2);

// Decoded dynamic weights for one cell pair.
struct RNetParams {
  int k = 0, a1 = 0, a2 = 0;
  Vec w1;    // a1 x (2k+1), row-major
  Vec w2;    // a2 x a1, row-major
  Vec w3;    // a2
  Vec beta;  // 3

  Vec flatten() const;
};

// Splits an H-vector in declared order; flatten() is its exact inverse.
RNetParams split_params(const Vec& h, int k, int a1, int a2);

struct LstmConfig {
  int vocab_size = 0;
  int embed_dim = 15;
  int hidden_dim = 30;
  int max_len = 40;
};

// Word embeddings plus a single-direction LSTM. Parameters live in the
// ParamStore handed to the constructor.
class LstmEncoder {
 public:
  LstmEncoder(const LstmConfig& cfg, ParamStore& store, Rng& rng);
  LstmEncoder(const LstmConfig& cfg, const ParamStore& store);  // bind by name

  const LstmConfig& config() const { return cfg_; }

  // L x hidden matrix of per-word states. Over-length sequences truncate
  // with a warning on stderr.
  Var encode_words(Tape& tape, const ParamStore& store,
                   const std::vector<int>& tokens) const;
  Var final_state(Tape& tape, Var states) const;  // 1 x hidden
  Var mean_state(Tape& tape, Var states) const;   // 1 x hidden

  int embedding_param() const { return embedding_; }

 private:
  LstmConfig cfg_;
  int embedding_ = -1;
  int wx_ = -1;
  int wh_ = -1;
  int b_ = -1;
};

struct TextEncoderConfig {
  int vocab_size = 0;
  int embed_dim = 15;
  int hidden_dim = 30;
  int k = 7;
  int a1 = 10;
  int a2 = 10;
  int max_len = 40;
};

// LSTM plus the attention/decoder stack that emits the relation network's
// dynamic weights for each cell pair.
class TextEncoder {
 public:
  TextEncoder(const TextEncoderConfig& cfg, ParamStore& store, Rng& rng);
  TextEncoder(const TextEncoderConfig& cfg, const ParamStore& store);

  const TextEncoderConfig& config() const { return cfg_; }
  int h_size() const { return param_size(cfg_.k, cfg_.a1, cfg_.a2); }
  const LstmEncoder& lstm() const { return lstm_; }

  Var encode_words(Tape& tape, const ParamStore& store,
                   const std::vector<int>& tokens) const {
    return lstm_.encode_words(tape, store, tokens);
  }
  Var mean_state(Tape& tape, Var states) const {
    return lstm_.mean_state(tape, states);
  }

  struct Attention {
    Var contexts;  // N x hidden
    Var alpha;     // N x L
  };

  // score(pair, word) = (P h_word) . pair_embed, alpha = row softmax.
  Attention attention_pool(Tape& tape, const ParamStore& store, Var states,
                           Var pair_embed_2k) const;
  // Ablation: alpha = 1/L for every pair.
  Attention uniform_pool(Tape& tape, Var states, int rows) const;

  // contexts (N x hidden) -> N x H dynamic parameter rows.
  Var decode(Tape& tape, const ParamStore& store, Var contexts) const;

  int embedding_param() const { return lstm_.embedding_param(); }

 private:
  static LstmConfig lstm_config(const TextEncoderConfig& cfg) {
    return {cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim, cfg.max_len};
  }
  TextEncoderConfig cfg_;
  LstmEncoder lstm_;
  int attn_proj_ = -1;
  int decoder_ = -1;
  int decoder_bias_ = -1;
};

}  // namespace groundnet
