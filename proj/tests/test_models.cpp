#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <set>

#include "baselines.hpp"
#include "model.hpp"
#include "puddleworld.hpp"
#include "rnet.hpp"
#include "testutil.hpp"

using namespace groundnet;

namespace {

ModelConfig toy_grid_config(const std::string& kind) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.task = "regression";
  cfg.map_m = 4;
  cfg.map_n = 4;
  cfg.vocab_size = 10;
  return cfg;
}

std::vector<int> toy_obs(Rng& rng, int cells) {
  std::vector<int> obs(cells);
  for (int& x : obs) x = rng.uniform_int(kEntityTableSize);
  return obs;
}

const std::vector<int> kToyTokens = {2, 5, 3, 7};

}  // namespace

TEST_CASE("l_encoding enumerates the 8 offsets onto [0, 1]") {
  CHECK(l_encoding(-1, -1) == 0.0);
  CHECK(l_encoding(1, 1) == 1.0);
  std::set<double> values;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      values.insert(l_encoding(dr, dc));
    }
  }
  CHECK(values.size() == 8);
  CHECK_THROWS_AS(l_encoding(0, 0), InputError);
  CHECK_THROWS_AS(l_encoding(2, 0), InputError);
}

TEST_CASE("pair layout: interior cells have 8 neighbors, corners 3") {
  const PairLayout layout = build_pair_layout(4, 4);
  std::vector<int> per_cell(16, 0);
  for (int s : layout.segment) per_cell[s]++;
  CHECK(per_cell[0] == 3);                   // corner
  CHECK(per_cell[3] == 3);
  CHECK(per_cell[1] == 5);                   // edge
  CHECK(per_cell[5] == 8);                   // interior
  CHECK(layout.count == 3 * 4 + 5 * 8 + 8 * 4);
}

TEST_CASE("relation_score: zero weights give zero, tanh bounds the output") {
  Rng rng(1);
  RNetParams p;
  p.k = 7;
  p.a1 = 10;
  p.a2 = 10;
  p.w1.assign(150, 0.0);
  p.w2.assign(100, 0.0);
  p.w3.assign(10, 0.0);
  p.beta.assign(3, 0.0);
  Vec phi_i(7, 0.5), phi_j(7, -0.25);
  CHECK(relation_score(phi_i, phi_j, 0.3, p) == 0.0);

  gntest::fill_uniform(p.w3, rng, -2.0, 2.0);  // W1 = W2 = 0 still forces 0
  CHECK(relation_score(phi_i, phi_j, 0.3, p) == 0.0);

  for (int trial = 0; trial < 1000; ++trial) {
    gntest::fill_uniform(p.w1, rng, -3.0, 3.0);
    gntest::fill_uniform(p.w2, rng, -3.0, 3.0);
    gntest::fill_uniform(p.w3, rng, -3.0, 3.0);
    Vec a(7), b(7);
    gntest::fill_uniform(a, rng, -2.0, 2.0);
    gntest::fill_uniform(b, rng, -2.0, 2.0);
    double bound = 0.0;
    for (double w : p.w3) bound += std::abs(w);
    CHECK(std::abs(relation_score(a, b, rng.uniform(), p)) <= bound + 1e-12);
  }
}

TEST_CASE("observation embedding is a plain table lookup") {
  RNetModel model(toy_grid_config("trnetattn"), 3);
  Tape tape;
  std::vector<int> obs(16, kEntityGrass);
  obs[5] = kEntityObjectBase + 2;
  obs[9] = kEntityObjectBase + 2;
  Var emb = model.observation_embedding(tape, obs);
  const Vec& v = tape.value(emb);
  const int k = model.config().k;
  for (int c = 0; c < k; ++c) {
    CHECK(v[5 * k + c] == v[9 * k + c]);  // same entity, same vector
    CHECK(v[0 * k + c] == v[1 * k + c]);  // empty cells all match
  }
}

TEST_CASE("relation map: zero first-layer weights force a constant Z1") {
  ModelConfig cfg = toy_grid_config("trnetattn");
  RNetModel model(cfg, 5);
  // Zero the decoder so every pair decodes to all-zero weights: r = 0.
  ParamStore& ps = model.params();
  for (const char* name : {"text/decoder", "text/decoder_b"}) {
    ParamTensor& t = ps[ps.find(name)];
    std::fill(t.data.begin(), t.data.end(), 0.0);
  }
  Rng rng(7);
  Tape tape;
  ForwardTrace trace;
  model.value_map(tape, toy_obs(rng, 16), kToyTokens, &trace);
  for (double z : trace.z1) CHECK(z == 0.0);
  for (double r : trace.scores) CHECK(r == 0.0);
}

TEST_CASE("pooling dominance: Z1 cell equals max over its pair scores") {
  RNetModel model(toy_grid_config("trnetattn"), 11);
  Rng rng(13);
  Tape tape;
  ForwardTrace trace;
  model.value_map(tape, toy_obs(rng, 16), kToyTokens, &trace);
  std::vector<double> best(16, -1e300);
  for (size_t p = 0; p < trace.scores.size(); ++p) {
    best[trace.pair_i[p]] = std::max(best[trace.pair_i[p]], trace.scores[p]);
    CHECK(trace.z1[trace.pair_i[p]] >= trace.scores[p]);
  }
  for (int i = 0; i < 16; ++i) {
    CHECK(trace.z1[i] == best[i]);
  }
}

TEST_CASE("locality: editing one cell only moves Z1 within Chebyshev 1") {
  ModelConfig cfg = toy_grid_config("trnetattn");
  cfg.map_m = 6;
  cfg.map_n = 6;
  RNetModel model(cfg, 17);
  Rng rng(19);
  std::vector<int> obs = toy_obs(rng, 36);
  Tape t1;
  ForwardTrace tr1;
  model.value_map(t1, obs, kToyTokens, &tr1);

  const int edit = 2 * 6 + 3;
  std::vector<int> obs2 = obs;
  obs2[edit] = obs[edit] == kEntityGrass ? kEntityWater : kEntityGrass;
  Tape t2;
  ForwardTrace tr2;
  model.value_map(t2, obs2, kToyTokens, &tr2);

  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) {
      const int i = r * 6 + c;
      const int dist = std::max(std::abs(r - 2), std::abs(c - 3));
      if (dist > 1) {
        CHECK(tr1.z1[i] == tr2.z1[i]);  // bit-identical outside the ball
      }
    }
  }
}

TEST_CASE("gradient maps compose the two ramps and the ones map") {
  Tape tape;
  Var z2 = tape.ramp_combine(tape.input(Shape{3}, Vec{0, 0, 1}), 4, 5);
  for (double v : tape.value(z2)) CHECK(v == 1.0);

  Var ramp = tape.ramp_combine(tape.input(Shape{3}, Vec{1, 0, 0}), 4, 10);
  const Vec& rv = tape.value(ramp);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 10; ++j) {
      CHECK(rv[i * 10 + j] == doctest::Approx(j / 9.0));
    }
  }

  Var both = tape.ramp_combine(tape.input(Shape{3}, Vec{1, 1, 0}), 6, 6);
  const Vec& bv = tape.value(both);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) {
      CHECK(bv[i * 6 + j] == doctest::Approx(i / 5.0 + j / 5.0));
      CHECK(bv[i * 6 + j] == doctest::Approx(bv[j * 6 + i]));
    }
  }
}

TEST_CASE("value head: zero kernel and bias give a zero map") {
  ModelConfig cfg = toy_grid_config("trnetattn");
  RNetModel model(cfg, 23);
  ParamStore& ps = model.params();
  for (const char* name : {"head/conv", "head/conv_b"}) {
    ParamTensor& t = ps[ps.find(name)];
    std::fill(t.data.begin(), t.data.end(), 0.0);
  }
  Rng rng(29);
  Tape tape;
  Var v = model.value_map(tape, toy_obs(rng, 16), kToyTokens);
  CHECK(tape.shape(v) == Shape{4, 4});
  for (double x : tape.value(v)) CHECK(x == 0.0);
}

TEST_CASE("full t-RNetAttn gradient check on a 4x4 map (every parameter)") {
  ModelConfig cfg = toy_grid_config("trnetattn");
  RNetModel model(cfg, 31);
  Rng rng(37);
  const std::vector<int> obs = toy_obs(rng, 16);
  Vec w(16);
  gntest::fill_uniform(w, rng, -1.0, 1.0);
  auto build = [&](Tape& t, const ParamStore& ps) {
    RNetModel probe(cfg, ps);
    Var v = probe.value_map(t, obs, kToyTokens);
    return t.sum(t.mul(t.reshape(v, Shape{16}), t.input(Shape{16}, w)));
  };
  auto rep = gntest::fd_check(model.params(), build, 1e-5);
  INFO("worst entry ", rep.worst);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("t-RNet ablation gradient check (sampled parameters)") {
  ModelConfig cfg = toy_grid_config("trnet");
  RNetModel model(cfg, 41);
  Rng rng(43);
  const std::vector<int> obs = toy_obs(rng, 16);
  Vec w(16);
  gntest::fill_uniform(w, rng, -1.0, 1.0);
  auto build = [&](Tape& t, const ParamStore& ps) {
    RNetModel probe(cfg, ps);
    Var v = probe.value_map(t, obs, kToyTokens);
    return t.sum(t.mul(t.reshape(v, Shape{16}), t.input(Shape{16}, w)));
  };
  auto rep = gntest::fd_check(model.params(), build, 1e-5, 48);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("t-RNetAttn pixel path: shapes and sampled gradient check") {
  ModelConfig cfg;
  cfg.kind = "trnetattn";
  cfg.task = "classification";
  cfg.image_size = 16;
  cfg.pixel_channels = {4, 4};
  cfg.k = 5;
  cfg.a1 = 4;
  cfg.a2 = 4;
  cfg.vocab_size = 10;
  CHECK(cfg.pixel_grid() == 2);
  cfg.image_size = 32;
  CHECK(cfg.pixel_grid() == 4);

  RNetModel model(cfg, 47);
  Rng rng(53);
  Vec image(32 * 32 * 3);
  gntest::fill_uniform(image, rng, 0.0, 1.0);
  Tape tape;
  ForwardTrace trace;
  Var logits = model.class_logits(tape, image, kToyTokens, &trace);
  CHECK(tape.shape(logits) == Shape{2});
  CHECK(trace.m == 4);
  CHECK(trace.probs.size() == 2);
  CHECK(trace.probs[0] + trace.probs[1] == doctest::Approx(1.0));

  Vec w(2);
  gntest::fill_uniform(w, rng, -1.0, 1.0);
  auto build = [&](Tape& t, const ParamStore& ps) {
    RNetModel probe(cfg, ps);
    Var lg = probe.class_logits(t, image, kToyTokens);
    return t.sum(t.mul(lg, t.input(Shape{2}, w)));
  };
  auto rep = gntest::fd_check(model.params(), build, 1e-5, 24);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("classification head: zero weights give a uniform prediction") {
  ModelConfig cfg;
  cfg.kind = "trnetattn";
  cfg.task = "classification";
  cfg.image_size = 16;
  cfg.pixel_channels = {4};
  cfg.k = 5;
  cfg.a1 = 4;
  cfg.a2 = 4;
  cfg.vocab_size = 10;
  RNetModel model(cfg, 59);
  ParamStore& ps = model.params();
  for (const char* name : {"head/linear", "head/linear_b"}) {
    ParamTensor& t = ps[ps.find(name)];
    std::fill(t.data.begin(), t.data.end(), 0.0);
  }
  Rng rng(61);
  Vec image(16 * 16 * 3);
  gntest::fill_uniform(image, rng, 0.0, 1.0);
  Tape tape;
  ForwardTrace trace;
  model.class_logits(tape, image, kToyTokens, &trace);
  CHECK(trace.probs[0] == doctest::Approx(0.5));
  CHECK(trace.probs[1] == doctest::Approx(0.5));
}

TEST_CASE("t-CNN: decoder sizes match the filter arithmetic") {
  CHECK(tcnn_param_size(3, 7) == 66);
  CHECK(tcnn_param_size(3, 13) == 120);
}

TEST_CASE("t-CNN: zero text vector zeroes the kernel and beta") {
  ModelConfig cfg = toy_grid_config("tcnn");
  TCnnModel model(cfg, 67);
  ParamStore& ps = model.params();
  for (const char* name : {"tcnn/decoder", "tcnn/decoder_b"}) {
    ParamTensor& t = ps[ps.find(name)];
    std::fill(t.data.begin(), t.data.end(), 0.0);
  }
  Rng rng(71);
  Tape tape;
  ForwardTrace trace;
  model.value_map(tape, toy_obs(rng, 16), kToyTokens, &trace);
  for (double z : trace.z1) CHECK(z == 0.0);
  for (double z : trace.z2) CHECK(z == 0.0);
}

TEST_CASE("t-CNN full gradient check on a 4x4 map") {
  ModelConfig cfg = toy_grid_config("tcnn");
  TCnnModel model(cfg, 73);
  Rng rng(79);
  const std::vector<int> obs = toy_obs(rng, 16);
  Vec w(16);
  gntest::fill_uniform(w, rng, -1.0, 1.0);
  auto build = [&](Tape& t, const ParamStore& ps) {
    TCnnModel probe(cfg, ps);
    Var v = probe.value_map(t, obs, kToyTokens);
    return t.sum(t.mul(t.reshape(v, Shape{16}), t.input(Shape{16}, w)));
  };
  auto rep = gntest::fd_check(model.params(), build, 1e-5, 64);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("t-UVFA: output shape, zero-parameter map, gradient check") {
  ModelConfig cfg = toy_grid_config("tuvfa");
  TUvfaModel model(cfg, 83);
  Rng rng(89);
  const std::vector<int> obs = toy_obs(rng, 16);
  Tape tape;
  Var v = model.value_map(tape, obs, kToyTokens);
  CHECK(tape.shape(v) == Shape{4, 4});

  ModelConfig cfg10 = cfg;
  cfg10.map_m = 10;
  cfg10.map_n = 10;
  TUvfaModel big(cfg10, 83);
  Tape t10;
  Var v10 = big.value_map(t10, std::vector<int>(100, kEntityGrass), kToyTokens);
  CHECK(t10.shape(v10) == Shape{10, 10});

  TUvfaModel zero(cfg, 97);
  ParamStore& zp = zero.params();
  for (int i = 0; i < zp.size(); ++i) {
    std::fill(zp[i].data.begin(), zp[i].data.end(), 0.0);
  }
  Tape tz;
  Var vz = zero.value_map(tz, obs, kToyTokens);
  for (double x : tz.value(vz)) CHECK(x == 0.0);

  Vec w(16);
  gntest::fill_uniform(w, rng, -1.0, 1.0);
  auto build = [&](Tape& t, const ParamStore& ps) {
    TUvfaModel probe(cfg, ps);
    Var out = probe.value_map(t, obs, kToyTokens);
    return t.sum(t.mul(t.reshape(out, Shape{16}), t.input(Shape{16}, w)));
  };
  auto rep = gntest::fd_check(model.params(), build, 1e-5, 48);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("t-VGG: probabilities, zero output layer, gradient check") {
  ModelConfig cfg;
  cfg.kind = "tvgg";
  cfg.task = "classification";
  cfg.image_size = 16;
  cfg.vgg_channels = {8, 8};
  cfg.vocab_size = 10;
  TVggModel model(cfg, 101);
  Rng rng(103);
  Vec image(16 * 16 * 3);
  gntest::fill_uniform(image, rng, 0.0, 1.0);
  Tape tape;
  ForwardTrace trace;
  model.class_logits(tape, image, kToyTokens, &trace);
  CHECK(trace.probs[0] + trace.probs[1] == doctest::Approx(1.0));

  TVggModel zero_out(cfg, 107);
  ParamStore& zp = zero_out.params();
  for (const char* name : {"vgg/out", "vgg/out_b"}) {
    ParamTensor& t = zp[zp.find(name)];
    std::fill(t.data.begin(), t.data.end(), 0.0);
  }
  Tape tz;
  ForwardTrace tr;
  zero_out.class_logits(tz, image, kToyTokens, &tr);
  CHECK(tr.probs[0] == doctest::Approx(0.5));

  Vec w(2);
  gntest::fill_uniform(w, rng, -1.0, 1.0);
  auto build = [&](Tape& t, const ParamStore& ps) {
    TVggModel probe(cfg, ps);
    Var lg = probe.class_logits(t, image, kToyTokens);
    return t.sum(t.mul(lg, t.input(Shape{2}, w)));
  };
  auto rep = gntest::fd_check(model.params(), build, 1e-5, 16);
  CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("model factory round-trips through checkpoints") {
  ModelConfig cfg = toy_grid_config("trnetattn");
  auto model = create_model(cfg, 113);
  Rng rng(127);
  const std::vector<int> obs = toy_obs(rng, 16);
  Tape t1;
  const Vec before = t1.value(model->value_map(t1, obs, kToyTokens));

  const std::string path = "model_test.gnck";
  save_model(*model, path);
  auto loaded = load_model(path);
  CHECK(loaded->config().kind == "trnetattn");
  CHECK(loaded->config().map_m == 4);
  Tape t2;
  const Vec after = t2.value(loaded->value_map(t2, obs, kToyTokens));
  CHECK(before == after);
  std::remove(path.c_str());

  CHECK_THROWS_AS(create_model([] {
                    ModelConfig c;
                    c.kind = "mystery";
                    return c;
                  }(), 1),
                  ConfigError);
}

TEST_CASE("wrong task pairing raises a configuration error") {
  ModelConfig cfg = toy_grid_config("trnetattn");
  RNetModel model(cfg, 131);
  Tape tape;
  Vec image(16 * 16 * 3, 0.0);
  CHECK_THROWS_AS(model.class_logits(tape, image, kToyTokens), ConfigError);

  ModelConfig vcfg;
  vcfg.kind = "tvgg";
  vcfg.task = "classification";
  vcfg.vocab_size = 10;
  vcfg.image_size = 16;
  vcfg.vgg_channels = {4};
  TVggModel vgg(vcfg, 137);
  CHECK_THROWS_AS(vgg.value_map(tape, std::vector<int>(16, 0), kToyTokens),
                  ConfigError);
}
