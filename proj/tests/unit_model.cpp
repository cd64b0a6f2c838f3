#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "apt/gradcheck.hpp"
#include "apt/model.hpp"
#include "apt/reference_encoder.hpp"
#include "apt/rng.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace apt;
using testutil::random_batch;
using testutil::small_config;

TEST_CASE("model config validation") {
  ModelConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());

  ModelConfig bad = cfg;
  bad.model_dim = 9;  // not divisible by num_heads=2
  CHECK_THROWS_AS(bad.validate(), RejectedInput);

  bad = cfg;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(bad.validate(), RejectedInput);

  bad = cfg;
  bad.layer_prefix_len = {1, 2, 3};  // wrong length for 2 layers
  CHECK_THROWS_AS(bad.validate(), RejectedInput);

  bad = cfg;
  bad.vocab_size = 0;
  CHECK_THROWS_AS(bad.validate(), RejectedInput);

  cfg.layer_prefix_len = {5, 7};
  CHECK(cfg.prefix_len_at(0) == 5);
  CHECK(cfg.prefix_len_at(1) == 7);
}

TEST_CASE("token batch padding") {
  TokenBatch b = TokenBatch::from_rows({{5, 6, 7}, {8}}, 0);
  CHECK(b.batch == 2);
  CHECK(b.seq == 3);
  CHECK(b.lengths == std::vector<int>{3, 1});
  CHECK(b.ids == std::vector<int>{5, 6, 7, 8, 0, 0});
  CHECK(b.row(1) == std::vector<int>{8, 0, 0});
}

TEST_CASE("encode input validation") {
  ModelConfig cfg = small_config();
  Backbone<double> bb = init_backbone<double>(cfg, Rng(1));
  Tape<double> tape;

  TokenBatch empty;
  CHECK_THROWS_AS((void)encode(tape, empty, cfg, bb, nullptr), RejectedInput);

  TokenBatch too_long = TokenBatch::from_rows({std::vector<int>(11, 1)}, 0);
  CHECK_THROWS_AS((void)encode(tape, too_long, cfg, bb, nullptr), RejectedInput);

  TokenBatch bad_id = TokenBatch::from_rows({{1, 13}}, 0);
  CHECK_THROWS_AS((void)encode(tape, bad_id, cfg, bb, nullptr), RejectedInput);
}

TEST_CASE("attention matches a hand-computed case") {
  // d=2, one head, identity projections: attn = softmax(x x^T / sqrt(2)) x.
  Tape<double> t;
  Tensor<double> eye({2, 2}, {1, 0, 0, 1});
  Tensor<double> dummy_v({2}, {0, 0});
  Tensor<double> dummy_m({2, 2}, {0, 0, 0, 0});
  int ieye = t.leaf(eye), iv = t.leaf(dummy_v), im = t.leaf(dummy_m);
  LayerLeafIds<double> lw{ieye, ieye, ieye, ieye, im, iv, im, iv, iv, iv, iv, iv};

  Tensor<double> x({2, 2}, {1.0, 0.0, 0.0, 1.0});
  int ix = t.leaf(x);
  int out = prefix_attention(t, ix, lw, std::nullopt, Tape<double>::kNone, 1);

  const double s = 1.0 / std::sqrt(2.0);
  // scores row 0: (s, 0); softmax -> (e^s, 1)/(e^s+1)
  const double p00 = std::exp(s) / (std::exp(s) + 1.0);
  const double p01 = 1.0 - p00;
  // out row 0 = p00 * x0 + p01 * x1 = (p00, p01); row 1 symmetric
  const auto& y = t.value(out).data;
  CHECK(y[0] == doctest::Approx(p00).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(p01).epsilon(1e-14));
  CHECK(y[2] == doctest::Approx(p01).epsilon(1e-14));
  CHECK(y[3] == doctest::Approx(p00).epsilon(1e-14));
}

TEST_CASE("zero-prefix encoder matches the reference implementation") {
  ModelConfig cfg = small_config();
  Backbone<double> bb = init_backbone<double>(cfg, Rng(3));
  TokenBatch batch = random_batch(3, 2, 8, cfg.vocab_size, Rng(4));

  Tape<double> tape;
  EncoderState<double> state = encode(tape, batch, cfg, bb, nullptr);

  for (int e = 0; e < batch.batch; ++e) {
    const std::vector<int> row = batch.row(e);
    std::vector<int> ids(row.begin(), row.begin() + batch.lengths[size_t(e)]);
    auto ref_hidden = ref::encode(cfg, bb, ids);
    REQUIRE(int(ref_hidden.size()) == cfg.num_layers + 1);
    for (int layer = 0; layer <= cfg.num_layers; ++layer) {
      const Tensor<double>& h = tape.value(state.hidden[size_t(layer)][size_t(e)]);
      const ref::Mat& r = ref_hidden[size_t(layer)];
      for (int i = 0; i < batch.lengths[size_t(e)]; ++i)
        for (int j = 0; j < cfg.model_dim; ++j)
          CHECK(std::abs(h.at(i, j) - r.at(i, j)) <= 1e-12);
    }
  }
}

TEST_CASE("head count changes the computation") {
  ModelConfig cfg = small_config();
  Backbone<double> bb = init_backbone<double>(cfg, Rng(5));
  TokenBatch batch = random_batch(1, 6, 6, cfg.vocab_size, Rng(6));

  Tape<double> t1;
  auto s1 = encode(t1, batch, cfg, bb, nullptr);
  ModelConfig cfg1 = cfg;
  cfg1.num_heads = 1;
  Tape<double> t2;
  auto s2 = encode(t2, batch, cfg1, bb, nullptr);
  const auto& a = t1.value(s1.hidden.back()[0]).data;
  const auto& b = t2.value(s2.hidden.back()[0]).data;
  double diff = 0.0;
  for (size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("per-example results ignore batch order exactly") {
  ModelConfig cfg = small_config();
  Backbone<double> bb = init_backbone<double>(cfg, Rng(7));
  TokenBatch batch = random_batch(3, 3, 7, cfg.vocab_size, Rng(8));

  TokenBatch rotated;
  rotated.batch = batch.batch;
  rotated.seq = batch.seq;
  for (int e : {2, 0, 1}) {
    auto row = batch.row(e);
    rotated.ids.insert(rotated.ids.end(), row.begin(), row.end());
    rotated.lengths.push_back(batch.lengths[size_t(e)]);
  }

  Tape<double> t1, t2;
  auto s1 = encode(t1, batch, cfg, bb, nullptr);
  auto s2 = encode(t2, rotated, cfg, bb, nullptr);
  const int perm[3] = {2, 0, 1};
  for (int pos = 0; pos < 3; ++pos) {
    const auto& a = t1.value(s1.hidden.back()[size_t(perm[pos])]).data;
    const auto& b = t2.value(s2.hidden.back()[size_t(pos)]).data;
    CHECK(a == b);  // bitwise
  }
}

TEST_CASE("padding never leaks into real positions") {
  ModelConfig cfg = small_config();
  Backbone<double> bb = init_backbone<double>(cfg, Rng(9));
  const std::vector<int> a_ids{4, 2, 9, 1, 6};
  const std::vector<int> b_ids{3, 3, 3, 3, 3, 3, 3, 3};

  Tape<double> solo_tape;
  auto solo = encode(solo_tape, TokenBatch::from_rows({a_ids}, 0), cfg, bb, nullptr);
  Tape<double> pair_tape;
  auto pair = encode(pair_tape, TokenBatch::from_rows({a_ids, b_ids}, 0), cfg, bb, nullptr);

  for (int layer = 0; layer <= cfg.num_layers; ++layer) {
    const Tensor<double>& hs = solo_tape.value(solo.hidden[size_t(layer)][0]);
    const Tensor<double>& hp = pair_tape.value(pair.hidden[size_t(layer)][0]);
    for (int i = 0; i < int(a_ids.size()); ++i)
      for (int j = 0; j < cfg.model_dim; ++j) CHECK(hs.at(i, j) == hp.at(i, j));
  }
}

TEST_CASE("materialize returns stacked hidden states") {
  ModelConfig cfg = small_config();
  Backbone<double> bb = init_backbone<double>(cfg, Rng(10));
  TokenBatch batch = random_batch(2, 4, 4, cfg.vocab_size, Rng(11));
  Tape<double> tape;
  auto state = encode(tape, batch, cfg, bb, nullptr);
  Tensor<double> h = state.materialize(tape, cfg.num_layers);
  CHECK(h.shape == Shape{2, 4, cfg.model_dim});
  const auto& e1 = tape.value(state.hidden.back()[1]).data;
  for (size_t i = 0; i < e1.size(); ++i) CHECK(h.data[e1.size() + i] == e1[i]);
}

TEST_CASE("dropout is seed-deterministic and off by default") {
  ModelConfig cfg = small_config();
  Backbone<double> bb = init_backbone<double>(cfg, Rng(12));
  TokenBatch batch = random_batch(2, 5, 5, cfg.vocab_size, Rng(13));

  Tape<double> t0, t1, t2, t3;
  auto plain = encode(t0, batch, cfg, bb, nullptr);
  Rng d1(77), d2(77), d3(78);
  DropoutCtx c1{&d1, 0.5}, c2{&d2, 0.5}, c3{&d3, 0.5};
  auto run1 = encode(t1, batch, cfg, bb, nullptr, &c1);
  auto run2 = encode(t2, batch, cfg, bb, nullptr, &c2);
  auto run3 = encode(t3, batch, cfg, bb, nullptr, &c3);

  CHECK(t1.value(run1.hidden.back()[0]).data == t2.value(run2.hidden.back()[0]).data);
  CHECK(t1.value(run1.hidden.back()[0]).data != t3.value(run3.hidden.back()[0]).data);
  CHECK(t1.value(run1.hidden.back()[0]).data != t0.value(plain.hidden.back()[0]).data);

  // p=0 context takes the exact no-dropout path
  Rng d4(79);
  DropoutCtx c4{&d4, 0.0};
  Tape<double> t4;
  auto run4 = encode(t4, batch, cfg, bb, nullptr, &c4);
  CHECK(t4.value(run4.hidden.back()[0]).data == t0.value(plain.hidden.back()[0]).data);
}

TEST_CASE("encoder gradients agree with finite differences") {
  ModelConfig cfg = small_config();
  cfg.num_layers = 1;  // keep the finite-difference loop affordable
  cfg.model_dim = 6;
  cfg.num_heads = 2;
  cfg.ffn_dim = 8;
  cfg.vocab_size = 9;
  Backbone<double> bb = init_backbone<double>(cfg, Rng(14));
  TokenBatch batch = random_batch(2, 3, 4, cfg.vocab_size, Rng(15));
  const std::vector<int> targets{1, 0};

  Rng hr(16);
  Tensor<double> head_w = Tensor<double>::randn({cfg.model_dim, 2}, hr, 0.5);
  Tensor<double> head_b = Tensor<double>::zeros({2});
  head_w.requires_grad = head_b.requires_grad = true;

  auto forward = [&](Tape<double>& t) {
    auto state = encode(t, batch, cfg, bb, nullptr);
    int logits = testutil::sequence_logits(t, state, t.leaf(head_w), t.leaf(head_b));
    return t.cross_entropy(logits, targets);
  };

  Tape<double> tape;
  tape.backward(forward(tape));
  auto eval = [&]() {
    Tape<double> t;
    return t.value(forward(t)).data[0];
  };
  for (Tensor<double>* p : {&bb.layers[0].w_q, &bb.layers[0].w1, &bb.layers[0].ln1_gain,
                            &bb.tok_embed, &bb.pos_embed, &head_w, &head_b}) {
    REQUIRE(p->has_grad());
    auto numeric = finite_diff_grad(eval, *p, 1e-5);
    CHECK(max_rel_err(p->grad, numeric, 1e-4) < 1e-6);
  }
}
