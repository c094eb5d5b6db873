#include "rnet.hpp"

#include <cmath>

#include "puddleworld.hpp"

namespace groundnet {

double l_encoding(int dr, int dc) {
  if (dr < -1 || dr > 1 || dc < -1 || dc > 1 || (dr == 0 && dc == 0)) {
    throw InputError("l_encoding: offset (" + std::to_string(dr) + ", " +
                     std::to_string(dc) + ") is not an 8-neighborhood move");
  }
  int index = (dr + 1) * 3 + (dc + 1);
  if (index > 4) --index;  // skip (0, 0)
  return static_cast<double>(index) / 7.0;
}

PairLayout build_pair_layout(int m, int n) {
  if (m < 2 || n < 2) {
    throw ConfigError("pair layout: map must be at least 2x2");
  }
  PairLayout out;
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < n; ++c) {
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= m || cc < 0 || cc >= n) continue;
          out.i_cell.push_back(r * n + c);
          out.j_cell.push_back(rr * n + cc);
          out.segment.push_back(r * n + c);
          out.l.push_back(l_encoding(dr, dc));
        }
      }
    }
  }
  out.count = static_cast<int>(out.i_cell.size());
  return out;
}

double relation_score(const Vec& phi_i, const Vec& phi_j, double l_ij,
                      const RNetParams& params) {
  const int u = 2 * params.k + 1;
  if (static_cast<int>(phi_i.size()) != params.k ||
      static_cast<int>(phi_j.size()) != params.k) {
    throw ConfigError("relation_score: embeddings do not match k = " +
                      std::to_string(params.k));
  }
  Vec in;
  in.reserve(u);
  in.insert(in.end(), phi_i.begin(), phi_i.end());
  in.insert(in.end(), phi_j.begin(), phi_j.end());
  in.push_back(l_ij);
  Vec z1(params.a1);
  for (int i = 0; i < params.a1; ++i) {
    double acc = 0.0;
    for (int j = 0; j < u; ++j) acc += params.w1[i * u + j] * in[j];
    z1[i] = std::tanh(acc);
  }
  Vec z2(params.a2);
  for (int i = 0; i < params.a2; ++i) {
    double acc = 0.0;
    for (int j = 0; j < params.a1; ++j) {
      acc += params.w2[i * params.a1 + j] * z1[j];
    }
    z2[i] = std::tanh(acc);
  }
  double r = 0.0;
  for (int i = 0; i < params.a2; ++i) r += params.w3[i] * z2[i];
  return r;
}

RNetModel::RNetModel(ModelConfig cfg, uint64_t seed) : Model(std::move(cfg)) {
  attention_ = cfg_.kind != "trnet";
  init_params(seed);
  if (cfg_.task == "classification") {
    const int g = cfg_.pixel_grid();
    pixel_pairs_ = build_pair_layout(g, g);
  } else {
    grid_pairs_ = build_pair_layout(cfg_.map_m, cfg_.map_n);
  }
}

RNetModel::RNetModel(ModelConfig cfg, const ParamStore& loaded)
    : Model(std::move(cfg)) {
  attention_ = cfg_.kind != "trnet";
  store_ = loaded;
  bind_params();
  if (cfg_.task == "classification") {
    const int g = cfg_.pixel_grid();
    pixel_pairs_ = build_pair_layout(g, g);
  } else {
    grid_pairs_ = build_pair_layout(cfg_.map_m, cfg_.map_n);
  }
}

void RNetModel::init_params(uint64_t seed) {
  Rng rng(Rng::mix(seed, 0x726e6574ULL));
  TextEncoderConfig tc{cfg_.vocab_size, cfg_.embed_dim, cfg_.hidden_dim,
                       cfg_.k,          cfg_.a1,        cfg_.a2,
                       cfg_.max_len};
  encoder_ = std::make_unique<TextEncoder>(tc, store_, rng);
  if (cfg_.task == "classification") {
    int in_c = 3;
    std::vector<int> channels = cfg_.pixel_channels;
    channels.push_back(cfg_.k);
    for (size_t i = 0; i < channels.size(); ++i) {
      const double bound = 1.0 / std::sqrt(9.0 * in_c);
      pixel_conv_.push_back(store_.add_uniform(
          "pixel/conv" + std::to_string(i),
          Shape{3, 3, in_c, channels[i]}, bound, rng));
      pixel_bias_.push_back(
          store_.add("pixel/conv" + std::to_string(i) + "_b",
                     Shape{channels[i]}));
      in_c = channels[i];
    }
    const int g = cfg_.pixel_grid();
    head_linear_ = store_.add_uniform(
        "head/linear", Shape{2, g * g},
        1.0 / std::sqrt(static_cast<double>(g * g)), rng);
    head_linear_bias_ = store_.add("head/linear_b", Shape{2});
  } else {
    obs_embedding_ = store_.add_uniform(
        "obs/embedding", Shape{cfg_.entity_table, cfg_.k},
        1.0 / std::sqrt(static_cast<double>(cfg_.k)), rng);
    head_conv_ = store_.add_uniform("head/conv", Shape{3, 3, 2, 1},
                                    1.0 / std::sqrt(18.0), rng);
    head_conv_bias_ = store_.add("head/conv_b", Shape{1});
  }
}

void RNetModel::bind_params() {
  TextEncoderConfig tc{cfg_.vocab_size, cfg_.embed_dim, cfg_.hidden_dim,
                       cfg_.k,          cfg_.a1,        cfg_.a2,
                       cfg_.max_len};
  encoder_ = std::make_unique<TextEncoder>(tc, store_);
  auto need = [&](const std::string& name) {
    const int id = store_.find(name);
    if (id < 0) {
      throw ConfigError("rnet: parameter '" + name + "' missing");
    }
    return id;
  };
  if (cfg_.task == "classification") {
    for (size_t i = 0; i < cfg_.pixel_channels.size() + 1; ++i) {
      pixel_conv_.push_back(need("pixel/conv" + std::to_string(i)));
      pixel_bias_.push_back(need("pixel/conv" + std::to_string(i) + "_b"));
    }
    head_linear_ = need("head/linear");
    head_linear_bias_ = need("head/linear_b");
  } else {
    obs_embedding_ = need("obs/embedding");
    head_conv_ = need("head/conv");
    head_conv_bias_ = need("head/conv_b");
  }
}

Var RNetModel::observation_embedding(Tape& tape,
                                     const std::vector<int>& obs) const {
  Var table = tape.param(store_, obs_embedding_);
  return tape.gather_rows(table, obs);
}

Var RNetModel::relation_map(Tape& tape, Var phi, const PairLayout& layout,
                            int m, int n, Var states,
                            ForwardTrace* trace) const {
  Var phi_i = tape.gather_rows(phi, layout.i_cell);
  Var phi_j = tape.gather_rows(phi, layout.j_cell);
  Var pair2k = tape.concat_cols({phi_i, phi_j});
  Var lcol = tape.input(Shape{layout.count, 1}, layout.l);
  Var pair_full = tape.concat_cols({phi_i, phi_j, lcol});

  TextEncoder::Attention attn =
      attention_ ? encoder_->attention_pool(tape, store_, states, pair2k)
                 : encoder_->uniform_pool(tape, states, layout.count);
  Var dyn = encoder_->decode(tape, store_, attn.contexts);  // N x H
  Var scores = tape.dynamic_relation(dyn, pair_full, cfg_.a1, cfg_.a2);
  Var z1 = tape.reshape(tape.segment_max(scores, layout.segment, m * n),
                        Shape{m, n});
  if (trace) {
    trace->m = m;
    trace->n = n;
    trace->z1 = tape.value(z1);
    trace->scores = tape.value(scores);
    trace->pair_i = layout.i_cell;
    trace->pair_j = layout.j_cell;
    if (trace->probe_i >= 0) {
      for (int p = 0; p < layout.count; ++p) {
        if (layout.i_cell[p] == trace->probe_i &&
            layout.j_cell[p] == trace->probe_j) {
          const Vec& alpha = tape.value(attn.alpha);
          const int L = tape.shape(attn.alpha)[1];
          trace->probe_alpha.assign(alpha.begin() + static_cast<size_t>(p) * L,
                                    alpha.begin() +
                                        static_cast<size_t>(p + 1) * L);
          break;
        }
      }
    }
  }
  return z1;
}

Var RNetModel::value_map(Tape& tape, const std::vector<int>& obs,
                         const std::vector<int>& tokens,
                         ForwardTrace* trace) const {
  if (cfg_.task != "regression") {
    throw ConfigError("rnet: model configured for " + cfg_.task +
                      " cannot emit value maps");
  }
  const int m = cfg_.map_m, n = cfg_.map_n;
  if (static_cast<int>(obs.size()) != m * n) {
    throw DimensionError("rnet: observation size does not match map");
  }
  Var phi = observation_embedding(tape, obs);
  Var states = encoder_->encode_words(tape, store_, tokens);
  Var z1 = relation_map(tape, phi, grid_pairs_, m, n, states, trace);

  // Gradient-map coefficients come from a pair-independent summary context.
  Var ctx = encoder_->mean_state(tape, states);
  Var hu = encoder_->decode(tape, store_, ctx);  // 1 x H
  const int hp = encoder_->h_size();
  Var beta = tape.slice(tape.reshape(hu, Shape{hp}), hp - 3, 3);
  Var z2 = tape.ramp_combine(beta, m, n);

  Var stacked = tape.stack_channels(z1, z2);
  Var kernel = tape.param(store_, head_conv_);
  Var bias = tape.param(store_, head_conv_bias_);
  Var v = tape.relu(tape.conv2d(stacked, kernel, bias, 1));
  Var out = tape.reshape(v, Shape{m, n});
  if (trace) {
    trace->z2 = tape.value(z2);
    trace->value = tape.value(out);
  }
  return out;
}

Var RNetModel::pixel_features(Tape& tape, const Vec& image) const {
  const int s = cfg_.image_size;
  if (static_cast<int>(image.size()) != s * s * 3) {
    throw DimensionError("rnet: image size does not match configuration");
  }
  Var x = tape.input(Shape{s, s, 3}, image);
  for (size_t i = 0; i < pixel_conv_.size(); ++i) {
    Var k = tape.param(store_, pixel_conv_[i]);
    Var b = tape.param(store_, pixel_bias_[i]);
    x = tape.tanh(tape.conv2d(x, k, b, 2));
  }
  return x;
}

Var RNetModel::class_logits(Tape& tape, const Vec& image,
                            const std::vector<int>& tokens,
                            ForwardTrace* trace) const {
  if (cfg_.task != "classification") {
    throw ConfigError("rnet: model configured for " + cfg_.task +
                      " cannot classify");
  }
  const int g = cfg_.pixel_grid();
  Var feats = pixel_features(tape, image);  // g x g x k
  Var phi = tape.reshape(feats, Shape{g * g, cfg_.k});
  Var states = encoder_->encode_words(tape, store_, tokens);
  Var z1 = relation_map(tape, phi, pixel_pairs_, g, g, states, trace);
  Var w = tape.param(store_, head_linear_);
  Var b = tape.param(store_, head_linear_bias_);
  Var logits = tape.add(
      tape.reshape(tape.matmul(w, tape.reshape(z1, Shape{g * g, 1})),
                   Shape{2}),
      b);
  if (trace) {
    Tape probe;
    trace->probs = probe.value(probe.softmax(
        probe.input(Shape{2}, tape.value(logits))));
  }
  return logits;
}

Var Model::value_map(Tape&, const std::vector<int>&, const std::vector<int>&,
                     ForwardTrace*) const {
  throw ConfigError("model '" + cfg_.kind + "' does not produce value maps");
}

Var Model::class_logits(Tape&, const Vec&, const std::vector<int>&,
                        ForwardTrace*) const {
  throw ConfigError("model '" + cfg_.kind + "' does not classify");
}

}  // namespace groundnet
