#include <cmath>
#include <vector>

#include "doctest.h"

#include "dg/mlp.hpp"
#include "dg/rng.hpp"
#include "dg/schedule.hpp"

using namespace dg;

namespace {

MlpDenoiser make_small(std::uint64_t seed = 3) {
  return MlpDenoiser(2, build_linear(50, 1e-3, 0.05), seed, {16, 16});
}

std::vector<Tensor> toy_data(int n, Rng& rng) {
  std::vector<Tensor> xs;
  for (int i = 0; i < n; ++i) {
    Tensor x({2});
    x[0] = static_cast<float>(rng.next_normal() + 2.0);
    x[1] = static_cast<float>(rng.next_normal() - 1.0);
    xs.push_back(x);
  }
  return xs;
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("architecture wiring") {
  MlpDenoiser m = make_small();
  CHECK(m.dim() == 2);
  CHECK(m.stack.in_dim() == 2 + MlpDenoiser::kTimeDim);
  CHECK(m.stack.out_dim() == 2);
  CHECK(m.stack.widths() == std::vector<int>{34, 16, 16, 2});
  CHECK(m.supports_input_gradient());
  CHECK_FALSE(m.has_label_table());
  CHECK(m.num_classes() == 0);
}

TEST_CASE("time embedding is 32-dim, bounded, and t-dependent") {
  MlpDenoiser m = make_small();
  auto e1 = m.time_embedding(1);
  auto e2 = m.time_embedding(40);
  REQUIRE(e1.size() == 32);
  CHECK(e1 != e2);
  for (double v : e1) CHECK(std::abs(v) <= 1.0 + 1e-12);
  CHECK(m.time_embedding(1) == e1);  // deterministic
}

TEST_CASE("same seed rebuilds identical weights, different seed does not") {
  MlpDenoiser a = make_small(7), b = make_small(7), c = make_small(8);
  CHECK(a.stack.layers[0].w == b.stack.layers[0].w);
  CHECK(a.stack.layers[0].w != c.stack.layers[0].w);
}

TEST_CASE("predict_epsilon validates t and label") {
  MlpDenoiser m = make_small();
  Tensor x({2});
  CHECK_NOTHROW(m.predict_epsilon(x, 1));
  CHECK_NOTHROW(m.predict_epsilon(x, 50));
  CHECK_NOTHROW(m.predict_epsilon(x, 0));  // t=0 is the clean-input feature point
  CHECK_THROWS(m.predict_epsilon(x, -1));
  CHECK_THROWS(m.predict_epsilon(x, 51));
  CHECK_THROWS(m.predict_epsilon(x, 10, 0));  // no label table attached
  Tensor bad({3});
  CHECK_THROWS(m.predict_epsilon(bad, 10));
}

TEST_CASE("tap activations expose hidden layers in order") {
  MlpDenoiser m = make_small();
  Tensor x({2}, {0.5f, -1.0f});
  FeatureBundle fb = m.tap_activations(x, 10, {0, 1});
  CHECK(fb.t_feat == 10);
  REQUIRE(fb.taps.size() == 2);
  CHECK(fb.taps[0].first == 0);
  CHECK(fb.taps[1].first == 1);
  CHECK(fb.taps[0].second.size() == 16);
  CHECK(fb.concat_length() == 32);
  CHECK_THROWS(m.tap_activations(x, 10, {2}));   // only 2 hidden layers
  CHECK_THROWS(m.tap_activations(x, 10, {-1}));

  // taps are the actual post-activations: re-derive via the stack
  std::vector<double> in = x.as_doubles();
  auto cond = m.conditioning_vector(10, std::nullopt);
  in.insert(in.end(), cond.begin(), cond.end());
  StackTrace tr;
  m.stack.forward(in, &tr);
  CHECK(fb.taps[0].second == tr.post[1]);
  CHECK(fb.taps[1].second == tr.post[2]);
}

TEST_CASE("epsilon_on_tape replays predict_epsilon and its input gradient") {
  MlpDenoiser m = make_small();
  // probe on the 2^-8 grid so x +- h stays exact in f32
  Tensor x({2}, {0.75f, 0.25f});
  const int t = 20;
  Tensor direct = m.predict_epsilon(x, t);

  Tape tape;
  auto lx = tape.leaf(x.as_doubles());
  auto out = m.epsilon_on_tape(tape, lx, t, std::nullopt, {}, nullptr);
  REQUIRE(tape.value(out).size() == 2);
  for (int i = 0; i < 2; ++i)
    CHECK(tape.value(out)[i] == doctest::Approx(static_cast<double>(direct[i])).epsilon(1e-6));

  // d(sum eps)/dx vs central differences on predict_epsilon
  tape.backward(tape.sum(out));
  const auto& g = tape.grad(lx);
  const float h = 0.00390625f;  // 2^-8
  for (int i = 0; i < 2; ++i) {
    Tensor xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    Tensor up = m.predict_epsilon(xp, t);
    Tensor dn = m.predict_epsilon(xm, t);
    const double fd = ((up[0] + up[1]) - (dn[0] + dn[1])) / (2.0 * static_cast<double>(h));
    CHECK(std::abs(g[i] - fd) < 1e-4 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("label table: null token reproduces the unconditional model") {
  MlpDenoiser m = make_small();
  Tensor x({2}, {1.0f, -0.5f});
  Tensor before = m.predict_epsilon(x, 15);

  m.attach_label_table(3, 99);
  CHECK(m.has_label_table());
  CHECK(m.num_classes() == 3);
  REQUIRE(m.label_table.size() == 4 * MlpDenoiser::kTimeDim);

  // null-token row is zero-initialized -> bit-identical unconditional output
  Tensor after = m.predict_epsilon(x, 15, std::nullopt);
  CHECK(before.values() == after.values());

  // class rows are random -> conditional output differs
  Tensor cond = m.predict_epsilon(x, 15, 1);
  CHECK(cond.values() != before.values());

  CHECK_THROWS(m.predict_epsilon(x, 15, 3));   // out of range
  CHECK_THROWS(m.predict_epsilon(x, 15, -1));
  CHECK_THROWS(m.attach_label_table(2, 1));    // already attached
}

TEST_CASE("training is deterministic and reduces the loss") {
  Rng rng(21);
  auto xs = toy_data(256, rng);

  TrainConfig cfg;
  cfg.steps = 400;
  cfg.batch = 32;
  cfg.lr = 1e-3;
  cfg.seed = 5;

  MlpDenoiser a = make_small(3);
  auto la = train_denoiser(a, xs, cfg);
  REQUIRE(static_cast<int>(la.size()) == cfg.steps);

  MlpDenoiser b = make_small(3);
  auto lb = train_denoiser(b, xs, cfg);
  CHECK(la == lb);  // loss curves bit-identical
  for (std::size_t l = 0; l < a.stack.layers.size(); ++l)
    CHECK(a.stack.layers[l].w == b.stack.layers[l].w);

  // head vs tail of the loss curve: averaged, training must make progress
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 50; ++i) head += la[i];
  for (int i = cfg.steps - 50; i < cfg.steps; ++i) tail += la[i];
  CHECK(tail < head);

  // steps = 0 leaves parameters untouched
  MlpDenoiser c = make_small(3);
  auto w0 = c.stack.layers[0].w;
  TrainConfig zero = cfg;
  zero.steps = 0;
  auto lz = train_denoiser(c, xs, zero);
  CHECK(lz.empty());
  CHECK(c.stack.layers[0].w == w0);
}

TEST_CASE("snr weighting changes the loss scale but not determinism") {
  Rng rng(22);
  auto xs = toy_data(64, rng);
  TrainConfig cfg;
  cfg.steps = 20;
  cfg.batch = 16;
  cfg.seed = 9;
  cfg.weight = LossWeight::snr;

  MlpDenoiser a = make_small(4);
  auto la = train_denoiser(a, xs, cfg);
  MlpDenoiser b = make_small(4);
  auto lb = train_denoiser(b, xs, cfg);
  CHECK(la == lb);

  cfg.weight = LossWeight::uniform;
  MlpDenoiser c = make_small(4);
  auto lc = train_denoiser(c, xs, cfg);
  CHECK(la != lc);
}

TEST_CASE("conditional training with label dropout is reproducible") {
  Rng rng(23);
  auto xs = toy_data(64, rng);
  std::vector<int> labels(64);
  for (int i = 0; i < 64; ++i) labels[i] = i % 2;

  TrainConfig cfg;
  cfg.steps = 30;
  cfg.batch = 16;
  cfg.seed = 11;

  MlpDenoiser a = make_small(6);
  a.attach_label_table(2, 77);
  auto la = train_denoiser(a, xs, &labels, 0.1, cfg);

  MlpDenoiser b = make_small(6);
  b.attach_label_table(2, 77);
  auto lb = train_denoiser(b, xs, &labels, 0.1, cfg);
  CHECK(la == lb);
  CHECK(a.label_table == b.label_table);

  // labels actually train the table: class rows move, and training with
  // labels requires the table
  MlpDenoiser c = make_small(6);
  CHECK_THROWS(train_denoiser(c, xs, &labels, 0.1, cfg));
}

}  // TEST_SUITE
