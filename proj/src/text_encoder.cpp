#include "text_encoder.hpp"

#include <cmath>
#include <iostream>

namespace groundnet {

int param_size(int k, int a1, int a2) {
  return (2 * k + 1) * a1 + a1 * a2 + a2 + 3;
}

Vec RNetParams::flatten() const {
  Vec h;
  h.reserve(w1.size() + w2.size() + w3.size() + beta.size());
  h.insert(h.end(), w1.begin(), w1.end());
  h.insert(h.end(), w2.begin(), w2.end());
  h.insert(h.end(), w3.begin(), w3.end());
  h.insert(h.end(), beta.begin(), beta.end());
  return h;
}

RNetParams split_params(const Vec& h, int k, int a1, int a2) {
  const int expected = param_size(k, a1, a2);
  if (static_cast<int>(h.size()) != expected) {
    throw ConfigError("split_params: vector of length " +
                      std::to_string(h.size()) + " does not match H = " +
                      std::to_string(expected));
  }
  RNetParams p;
  p.k = k;
  p.a1 = a1;
  p.a2 = a2;
  auto it = h.begin();
  p.w1.assign(it, it + (2 * k + 1) * a1);
  it += (2 * k + 1) * a1;
  p.w2.assign(it, it + a1 * a2);
  it += a1 * a2;
  p.w3.assign(it, it + a2);
  it += a2;
  p.beta.assign(it, h.end());
  return p;
}

namespace {
int require_param(const ParamStore& store, const std::string& name) {
  const int id = store.find(name);
  if (id < 0) {
    throw ConfigError("text encoder: parameter '" + name +
                      "' missing from store");
  }
  return id;
}
}  // namespace

LstmEncoder::LstmEncoder(const LstmConfig& cfg, ParamStore& store, Rng& rng)
    : cfg_(cfg) {
  if (cfg.vocab_size < 2) {
    throw ConfigError("lstm encoder: vocabulary must include reserved ids");
  }
  const int e = cfg.embed_dim, h = cfg.hidden_dim;
  embedding_ = store.add_uniform("text/embedding", Shape{cfg.vocab_size, e},
                                 1.0 / std::sqrt(static_cast<double>(e)), rng);
  wx_ = store.add_uniform("text/lstm_wx", Shape{4 * h, e},
                          1.0 / std::sqrt(static_cast<double>(e)), rng);
  wh_ = store.add_uniform("text/lstm_wh", Shape{4 * h, h},
                          1.0 / std::sqrt(static_cast<double>(h)), rng);
  b_ = store.add("text/lstm_b", Shape{4 * h});
}

LstmEncoder::LstmEncoder(const LstmConfig& cfg, const ParamStore& store)
    : cfg_(cfg) {
  embedding_ = require_param(store, "text/embedding");
  wx_ = require_param(store, "text/lstm_wx");
  wh_ = require_param(store, "text/lstm_wh");
  b_ = require_param(store, "text/lstm_b");
}

Var LstmEncoder::encode_words(Tape& tape, const ParamStore& store,
                              const std::vector<int>& tokens) const {
  if (tokens.empty()) {
    throw InputError("encode_words: empty token sequence");
  }
  std::vector<int> ids = tokens;
  if (static_cast<int>(ids.size()) > cfg_.max_len) {
    std::cerr << "groundnet: warning: instruction of " << ids.size()
              << " tokens truncated to " << cfg_.max_len << "\n";
    ids.resize(cfg_.max_len);
  }
  const int L = static_cast<int>(ids.size());
  const int e = cfg_.embed_dim, h = cfg_.hidden_dim;

  Var table = tape.param(store, embedding_);
  Var x = tape.gather_rows(table, ids);  // L x e
  Var wx = tape.param(store, wx_);
  Var wh = tape.param(store, wh_);
  Var b = tape.reshape(tape.param(store, b_), Shape{4 * h, 1});

  Var hprev = tape.input(Shape{h, 1}, Vec(h, 0.0));
  Var cprev = tape.input(Shape{h, 1}, Vec(h, 0.0));
  std::vector<Var> states;
  states.reserve(L);
  Var xflat = tape.reshape(x, Shape{L * e});
  for (int t = 0; t < L; ++t) {
    Var xt = tape.reshape(tape.slice(xflat, t * e, e), Shape{e, 1});
    Var pre =
        tape.add(tape.add(tape.matmul(wx, xt), tape.matmul(wh, hprev)), b);
    Var flat = tape.reshape(pre, Shape{4 * h});
    Var gi = tape.sigmoid(tape.slice(flat, 0, h));
    Var gf = tape.sigmoid(tape.slice(flat, h, h));
    Var gg = tape.tanh(tape.slice(flat, 2 * h, h));
    Var go = tape.sigmoid(tape.slice(flat, 3 * h, h));
    Var c = tape.add(tape.mul(gf, tape.reshape(cprev, Shape{h})),
                     tape.mul(gi, gg));
    Var hs = tape.mul(go, tape.tanh(c));
    states.push_back(hs);
    hprev = tape.reshape(hs, Shape{h, 1});
    cprev = tape.reshape(c, Shape{h, 1});
  }
  return tape.reshape(tape.concat(states), Shape{L, h});
}

Var LstmEncoder::final_state(Tape& tape, Var states) const {
  const int L = tape.shape(states)[0];
  return tape.gather_rows(states, {L - 1});
}

Var LstmEncoder::mean_state(Tape& tape, Var states) const {
  const int L = tape.shape(states)[0];
  Var ones = tape.input(Shape{1, L}, Vec(L, 1.0 / L));
  return tape.matmul(ones, states);
}

TextEncoder::TextEncoder(const TextEncoderConfig& cfg, ParamStore& store,
                         Rng& rng)
    : cfg_(cfg), lstm_(lstm_config(cfg), store, rng) {
  const int h = cfg.hidden_dim;
  const int hp = h_size();
  attn_proj_ = store.add_uniform("text/attn_proj", Shape{2 * cfg.k, h},
                                 1.0 / std::sqrt(static_cast<double>(h)), rng);
  decoder_ = store.add_uniform("text/decoder", Shape{hp, h},
                               1.0 / std::sqrt(static_cast<double>(h)), rng);
  decoder_bias_ = store.add("text/decoder_b", Shape{hp});
}

TextEncoder::TextEncoder(const TextEncoderConfig& cfg, const ParamStore& store)
    : cfg_(cfg), lstm_(lstm_config(cfg), store) {
  attn_proj_ = require_param(store, "text/attn_proj");
  decoder_ = require_param(store, "text/decoder");
  decoder_bias_ = require_param(store, "text/decoder_b");
}

TextEncoder::Attention TextEncoder::attention_pool(Tape& tape,
                                                   const ParamStore& store,
                                                   Var states,
                                                   Var pair_embed_2k) const {
  Var proj = tape.param(store, attn_proj_);           // 2k x hidden
  Var q = tape.matmul(states, tape.transpose(proj));  // L x 2k
  Var scores = tape.matmul(pair_embed_2k, tape.transpose(q));  // N x L
  Var alpha = tape.row_softmax(scores);
  Var contexts = tape.matmul(alpha, states);  // N x hidden
  return {contexts, alpha};
}

TextEncoder::Attention TextEncoder::uniform_pool(Tape& tape, Var states,
                                                 int rows) const {
  const int L = tape.shape(states)[0];
  Var alpha = tape.input(Shape{rows, L},
                         Vec(static_cast<size_t>(rows) * L, 1.0 / L));
  Var contexts = tape.matmul(alpha, states);
  return {contexts, alpha};
}

Var TextEncoder::decode(Tape& tape, const ParamStore& store,
                        Var contexts) const {
  Var d = tape.param(store, decoder_);
  Var bias = tape.param(store, decoder_bias_);
  return tape.add_rowvec(tape.matmul(contexts, tape.transpose(d)), bias);
}

}  // namespace groundnet
