#include "baselines.hpp"

#include <cmath>

namespace groundnet {

namespace {

int require_param(const ParamStore& store, const std::string& name) {
  const int id = store.find(name);
  if (id < 0) throw ConfigError("baseline: parameter '" + name + "' missing");
  return id;
}

LstmConfig lstm_config(const ModelConfig& cfg) {
  return {cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim, cfg.max_len};
}

}  // namespace

int tcnn_param_size(int filter, int k) { return filter * filter * k + 3; }

TCnnModel::TCnnModel(ModelConfig cfg, uint64_t seed) : Model(std::move(cfg)) {
  if (cfg_.tcnn_filter % 2 == 0) {
    throw ConfigError("tcnn: filter size must be odd");
  }
  Rng rng(Rng::mix(seed, 0x74636e6eULL));
  lstm_ = std::make_unique<LstmEncoder>(lstm_config(cfg_), store_, rng);
  const int h = cfg_.hidden_dim;
  const int hp = tcnn_param_size(cfg_.tcnn_filter, cfg_.k);
  obs_embedding_ = store_.add_uniform(
      "obs/embedding", Shape{cfg_.entity_table, cfg_.k},
      1.0 / std::sqrt(static_cast<double>(cfg_.k)), rng);
  decoder_ = store_.add_uniform("tcnn/decoder", Shape{hp, h},
                                1.0 / std::sqrt(static_cast<double>(h)), rng);
  decoder_bias_ = store_.add("tcnn/decoder_b", Shape{hp});
  head_conv_ = store_.add_uniform("head/conv", Shape{3, 3, 2, 1},
                                  1.0 / std::sqrt(18.0), rng);
  head_conv_bias_ = store_.add("head/conv_b", Shape{1});
}

TCnnModel::TCnnModel(ModelConfig cfg, const ParamStore& loaded)
    : Model(std::move(cfg)) {
  store_ = loaded;
  lstm_ = std::make_unique<LstmEncoder>(lstm_config(cfg_), store_);
  obs_embedding_ = require_param(store_, "obs/embedding");
  decoder_ = require_param(store_, "tcnn/decoder");
  decoder_bias_ = require_param(store_, "tcnn/decoder_b");
  head_conv_ = require_param(store_, "head/conv");
  head_conv_bias_ = require_param(store_, "head/conv_b");
}

Var TCnnModel::value_map(Tape& tape, const std::vector<int>& obs,
                         const std::vector<int>& tokens,
                         ForwardTrace* trace) const {
  const int m = cfg_.map_m, n = cfg_.map_n, k = cfg_.k, f = cfg_.tcnn_filter;
  if (static_cast<int>(obs.size()) != m * n) {
    throw DimensionError("tcnn: observation size does not match map");
  }
  Var table = tape.param(store_, obs_embedding_);
  Var phi = tape.reshape(tape.gather_rows(table, obs), Shape{m, n, k});

  Var states = lstm_->encode_words(tape, store_, tokens);
  Var hfinal = lstm_->final_state(tape, states);  // 1 x hidden
  Var dec = tape.param(store_, decoder_);
  Var dec_b = tape.param(store_, decoder_bias_);
  const int hp = tcnn_param_size(f, k);
  Var h = tape.reshape(
      tape.add_rowvec(tape.matmul(hfinal, tape.transpose(dec)), dec_b),
      Shape{hp});

  Var kernel = tape.reshape(tape.slice(h, 0, f * f * k), Shape{f, f, k, 1});
  Var beta = tape.slice(h, f * f * k, 3);
  Var z1 = tape.reshape(tape.conv2d(phi, kernel, 1), Shape{m, n});
  Var z2 = tape.ramp_combine(beta, m, n);

  Var stacked = tape.stack_channels(z1, z2);
  Var hk = tape.param(store_, head_conv_);
  Var hb = tape.param(store_, head_conv_bias_);
  Var v = tape.relu(tape.conv2d(stacked, hk, hb, 1));
  Var out = tape.reshape(v, Shape{m, n});
  if (trace) {
    trace->m = m;
    trace->n = n;
    trace->z1 = tape.value(z1);
    trace->z2 = tape.value(z2);
    trace->value = tape.value(out);
  }
  return out;
}

TUvfaModel::TUvfaModel(ModelConfig cfg, uint64_t seed) : Model(std::move(cfg)) {
  if (cfg_.map_m % 2 != 0 || cfg_.map_n % 2 != 0) {
    throw ConfigError("tuvfa: map sides must be even for the deconv decoder");
  }
  Rng rng(Rng::mix(seed, 0x75766661ULL));
  lstm_ = std::make_unique<LstmEncoder>(lstm_config(cfg_), store_, rng);
  const int h = cfg_.hidden_dim;
  const int mid = (cfg_.map_m / 2) * (cfg_.map_n / 2) * cfg_.uvfa_channels;
  const int obs_dim = cfg_.map_m * cfg_.map_n * cfg_.k;
  obs_embedding_ = store_.add_uniform(
      "obs/embedding", Shape{cfg_.entity_table, cfg_.k},
      1.0 / std::sqrt(static_cast<double>(cfg_.k)), rng);
  text_proj_ = store_.add_uniform(
      "uvfa/text", Shape{cfg_.uvfa_text_dim, h},
      1.0 / std::sqrt(static_cast<double>(h)), rng);
  text_proj_bias_ = store_.add("uvfa/text_b", Shape{cfg_.uvfa_text_dim});
  dense_ = store_.add_uniform(
      "uvfa/dense", Shape{mid, cfg_.uvfa_text_dim + obs_dim},
      1.0 / std::sqrt(static_cast<double>(cfg_.uvfa_text_dim + obs_dim)), rng);
  dense_bias_ = store_.add("uvfa/dense_b", Shape{mid});
  const int dk = cfg_.uvfa_deconv_kernel;
  deconv_ = store_.add_uniform(
      "uvfa/deconv", Shape{dk, dk, cfg_.uvfa_channels, 1},
      1.0 / std::sqrt(static_cast<double>(dk * dk * cfg_.uvfa_channels)), rng);
  deconv_bias_ = store_.add("uvfa/deconv_b", Shape{1});
}

TUvfaModel::TUvfaModel(ModelConfig cfg, const ParamStore& loaded)
    : Model(std::move(cfg)) {
  store_ = loaded;
  lstm_ = std::make_unique<LstmEncoder>(lstm_config(cfg_), store_);
  obs_embedding_ = require_param(store_, "obs/embedding");
  text_proj_ = require_param(store_, "uvfa/text");
  text_proj_bias_ = require_param(store_, "uvfa/text_b");
  dense_ = require_param(store_, "uvfa/dense");
  dense_bias_ = require_param(store_, "uvfa/dense_b");
  deconv_ = require_param(store_, "uvfa/deconv");
  deconv_bias_ = require_param(store_, "uvfa/deconv_b");
}

Var TUvfaModel::value_map(Tape& tape, const std::vector<int>& obs,
                          const std::vector<int>& tokens,
                          ForwardTrace* trace) const {
  const int m = cfg_.map_m, n = cfg_.map_n;
  if (static_cast<int>(obs.size()) != m * n) {
    throw DimensionError("tuvfa: observation size does not match map");
  }
  Var table = tape.param(store_, obs_embedding_);
  Var phi_flat =
      tape.reshape(tape.gather_rows(table, obs), Shape{m * n * cfg_.k});

  Var states = lstm_->encode_words(tape, store_, tokens);
  Var hfinal = lstm_->final_state(tape, states);
  Var tp = tape.param(store_, text_proj_);
  Var tb = tape.param(store_, text_proj_bias_);
  Var text = tape.reshape(
      tape.add_rowvec(tape.matmul(hfinal, tape.transpose(tp)), tb),
      Shape{cfg_.uvfa_text_dim});

  Var joint = tape.concat({text, phi_flat});
  Var dense = tape.param(store_, dense_);
  Var dense_b = tape.param(store_, dense_bias_);
  const int mh = m / 2, mw = n / 2;
  Var mid = tape.tanh(tape.add(
      tape.reshape(
          tape.matmul(dense, tape.reshape(joint, Shape{tape.shape(joint).numel(), 1})),
          Shape{mh * mw * cfg_.uvfa_channels}),
      dense_b));
  Var grid = tape.reshape(mid, Shape{mh, mw, cfg_.uvfa_channels});
  Var dk = tape.param(store_, deconv_);
  Var db = tape.param(store_, deconv_bias_);
  Var out = tape.reshape(tape.conv_transpose2d(grid, dk, db, 2), Shape{m, n});
  if (trace) {
    trace->m = m;
    trace->n = n;
    trace->value = tape.value(out);
  }
  return out;
}

TVggModel::TVggModel(ModelConfig cfg, uint64_t seed) : Model(std::move(cfg)) {
  Rng rng(Rng::mix(seed, 0x74766767ULL));
  lstm_ = std::make_unique<LstmEncoder>(lstm_config(cfg_), store_, rng);
  int in_c = 3;
  int side = cfg_.image_size;
  for (size_t i = 0; i < cfg_.vgg_channels.size(); ++i) {
    const int out_c = cfg_.vgg_channels[i];
    conv_.push_back(store_.add_uniform("vgg/conv" + std::to_string(i),
                                       Shape{3, 3, in_c, out_c},
                                       1.0 / std::sqrt(9.0 * in_c), rng));
    conv_bias_.push_back(
        store_.add("vgg/conv" + std::to_string(i) + "_b", Shape{out_c}));
    in_c = out_c;
    side /= 2;
  }
  const int flat = side * side * in_c;
  const int d = cfg_.vgg_dense;
  dense1_ = store_.add_uniform(
      "vgg/dense1", Shape{d, flat + cfg_.hidden_dim},
      1.0 / std::sqrt(static_cast<double>(flat + cfg_.hidden_dim)), rng);
  dense1_bias_ = store_.add("vgg/dense1_b", Shape{d});
  dense2_ = store_.add_uniform("vgg/dense2", Shape{d, d},
                               1.0 / std::sqrt(static_cast<double>(d)), rng);
  dense2_bias_ = store_.add("vgg/dense2_b", Shape{d});
  out_ = store_.add_uniform("vgg/out", Shape{2, d},
                            1.0 / std::sqrt(static_cast<double>(d)), rng);
  out_bias_ = store_.add("vgg/out_b", Shape{2});
}

TVggModel::TVggModel(ModelConfig cfg, const ParamStore& loaded)
    : Model(std::move(cfg)) {
  store_ = loaded;
  lstm_ = std::make_unique<LstmEncoder>(lstm_config(cfg_), store_);
  for (size_t i = 0; i < cfg_.vgg_channels.size(); ++i) {
    conv_.push_back(require_param(store_, "vgg/conv" + std::to_string(i)));
    conv_bias_.push_back(
        require_param(store_, "vgg/conv" + std::to_string(i) + "_b"));
  }
  dense1_ = require_param(store_, "vgg/dense1");
  dense1_bias_ = require_param(store_, "vgg/dense1_b");
  dense2_ = require_param(store_, "vgg/dense2");
  dense2_bias_ = require_param(store_, "vgg/dense2_b");
  out_ = require_param(store_, "vgg/out");
  out_bias_ = require_param(store_, "vgg/out_b");
}

Var TVggModel::class_logits(Tape& tape, const Vec& image,
                            const std::vector<int>& tokens,
                            ForwardTrace* trace) const {
  const int s = cfg_.image_size;
  if (static_cast<int>(image.size()) != s * s * 3) {
    throw DimensionError("tvgg: image size does not match configuration");
  }
  Var x = tape.input(Shape{s, s, 3}, image);
  for (size_t i = 0; i < conv_.size(); ++i) {
    Var k = tape.param(store_, conv_[i]);
    Var b = tape.param(store_, conv_bias_[i]);
    x = tape.relu(tape.conv2d(x, k, b, 2));
  }
  const int flat = tape.shape(x).numel();
  Var feats = tape.reshape(x, Shape{flat});

  Var states = lstm_->encode_words(tape, store_, tokens);
  Var text = tape.reshape(lstm_->mean_state(tape, states),
                          Shape{cfg_.hidden_dim});
  Var joint = tape.concat({feats, text});

  auto dense = [&](Var in, int w_id, int b_id) {
    Var w = tape.param(store_, w_id);
    Var b = tape.param(store_, b_id);
    const int rows = tape.shape(w)[0];
    return tape.add(
        tape.reshape(
            tape.matmul(w, tape.reshape(in, Shape{tape.shape(in).numel(), 1})),
            Shape{rows}),
        b);
  };
  Var h1 = tape.tanh(dense(joint, dense1_, dense1_bias_));
  Var h2 = tape.tanh(dense(h1, dense2_, dense2_bias_));
  Var logits = dense(h2, out_, out_bias_);
  if (trace) {
    Tape probe;
    trace->probs = probe.value(
        probe.softmax(probe.input(Shape{2}, tape.value(logits))));
  }
  return logits;
}

}  // namespace groundnet
