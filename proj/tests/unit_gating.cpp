#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "apt/gating.hpp"
#include "apt/gradcheck.hpp"
#include "apt/model.hpp"
#include "apt/rng.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace apt;
using testutil::random_batch;
using testutil::small_config;

namespace {

constexpr GateMode kAllModes[] = {GateMode::apt,       GateMode::no_token_gate,
                                  GateMode::no_layer_gate, GateMode::no_hidden,
                                  GateMode::pt2,       GateMode::pt2_plus,
                                  GateMode::pt2_star};

template <typename T>
double loss_with_module(GatingModule<T>& module, Backbone<T>& bb, const TokenBatch& batch,
                        Tensor<T>& head_w, Tensor<T>& head_b,
                        const std::vector<int>& targets) {
  Tape<T> tape;
  module.attach(tape);
  auto state = encode(tape, batch, module.config(), bb, &module);
  int logits = testutil::sequence_logits(tape, state, tape.leaf(head_w), tape.leaf(head_b));
  return double(tape.value(tape.cross_entropy(logits, targets)).data[0]);
}

}  // namespace

TEST_CASE("gate mode names round-trip") {
  for (GateMode m : kAllModes) CHECK(parse_gate_mode(gate_mode_name(m)) == m);
  CHECK_THROWS_AS(parse_gate_mode("fancy"), RejectedInput);
}

TEST_CASE("mode predicates") {
  CHECK(mode_has_token_gate(GateMode::apt));
  CHECK(mode_has_token_gate(GateMode::no_layer_gate));
  CHECK(mode_has_token_gate(GateMode::no_hidden));
  CHECK_FALSE(mode_has_token_gate(GateMode::no_token_gate));
  CHECK_FALSE(mode_has_token_gate(GateMode::pt2));

  CHECK(mode_has_layer_scale(GateMode::apt));
  CHECK(mode_has_layer_scale(GateMode::no_token_gate));
  CHECK(mode_has_layer_scale(GateMode::no_hidden));
  CHECK_FALSE(mode_has_layer_scale(GateMode::no_layer_gate));

  CHECK(mode_uses_hidden(GateMode::apt));
  CHECK(mode_uses_hidden(GateMode::no_layer_gate));
  CHECK_FALSE(mode_uses_hidden(GateMode::no_hidden));

  for (GateMode m : {GateMode::pt2, GateMode::pt2_plus, GateMode::pt2_star})
    CHECK(mode_is_passthrough(m));
  CHECK_FALSE(mode_is_passthrough(GateMode::apt));
}

TEST_CASE("pt2_plus grows lengths to ceil(1.5 l)") {
  ModelConfig cfg = small_config();
  cfg.num_layers = 5;
  cfg.layer_prefix_len = {1, 2, 3, 4, 5};
  CHECK(effective_prefix_lengths(cfg, GateMode::pt2_plus) == std::vector<int>{2, 3, 5, 6, 8});
  CHECK(effective_prefix_lengths(cfg, GateMode::apt) == std::vector<int>{1, 2, 3, 4, 5});
  cfg.layer_prefix_len.clear();
  cfg.prefix_len = 4;
  CHECK(effective_prefix_lengths(cfg, GateMode::pt2_plus) == std::vector<int>{6, 6, 6, 6, 6});
}

TEST_CASE("trainable parameter counts: closed form, hand values, actual tensors") {
  ModelConfig cfg;
  cfg.num_layers = 3;
  cfg.num_heads = 2;
  cfg.model_dim = 16;
  cfg.ffn_dim = 24;
  cfg.vocab_size = 11;
  cfg.max_seq_len = 8;
  cfg.prefix_len = 4;

  CHECK(trainable_param_count(cfg, GateMode::pt2) == 384);            // 3 * 2*4*16
  CHECK(trainable_param_count(cfg, GateMode::apt) == 579);            // + 3*(16*4 + 1)
  CHECK(trainable_param_count(cfg, GateMode::no_token_gate) == 387);  // + 3
  CHECK(trainable_param_count(cfg, GateMode::no_layer_gate) == 576);  // + 3*64
  CHECK(trainable_param_count(cfg, GateMode::no_hidden) == 399);      // + 3*(4+1)
  CHECK(trainable_param_count(cfg, GateMode::pt2_plus) == 576);       // l -> 6
  CHECK(head_param_count(16, 5) == 85);

  ModelConfig var = cfg;
  var.layer_prefix_len = {1, 0, 5};
  CHECK(trainable_param_count(var, GateMode::pt2_star) == 192);  // 2*6*16

  for (GateMode m : kAllModes) {
    const ModelConfig& use = m == GateMode::pt2_star ? var : cfg;
    GatingModule<float> module(use, m, Rng(1));
    long long total = 0;
    module.visit([&](const std::string&, Tensor<float>& t) {
      CHECK(t.requires_grad);
      total += t.size();
    });
    CHECK(total == trainable_param_count(use, m));
  }
}

TEST_CASE("same seed gives every arm the same prefix bank") {
  ModelConfig cfg = small_config();
  GatingModule<double> a(cfg, GateMode::apt, Rng(42));
  GatingModule<double> b(cfg, GateMode::pt2, Rng(42));
  GatingModule<double> c(cfg, GateMode::no_hidden, Rng(42));
  for (int i = 0; i < cfg.num_layers; ++i) {
    CHECK(a.bank().key[size_t(i)].data == b.bank().key[size_t(i)].data);
    CHECK(a.bank().value[size_t(i)].data == b.bank().value[size_t(i)].data);
    CHECK(a.bank().key[size_t(i)].data == c.bank().key[size_t(i)].data);
  }
  GatingModule<double> d(cfg, GateMode::pt2, Rng(43));
  CHECK(a.bank().key[0].data != d.bank().key[0].data);
}

TEST_CASE("gates pinned to identity reproduce pass-through bitwise") {
  ModelConfig cfg = small_config();
  TokenBatch batch = random_batch(3, 2, 6, cfg.vocab_size, Rng(2));
  const std::vector<int> targets{0, 1, 1};

  auto run = [&]<typename T>(T) {
    Backbone<T> bb = init_backbone<T>(cfg, Rng(3));
    bb.visit([](const std::string&, Tensor<T>& t) { t.requires_grad = false; });
    Rng hr(4);
    Tensor<T> head_w = Tensor<T>::randn({cfg.model_dim, 2}, hr, 0.5);
    Tensor<T> head_b = Tensor<T>::zeros({2});

    GatingModule<T> forced(cfg, GateMode::apt, Rng(5), GateOverride{true});
    GatingModule<T> plain(cfg, GateMode::pt2, Rng(5));
    double lf = loss_with_module(forced, bb, batch, head_w, head_b, targets);
    double lp = loss_with_module(plain, bb, batch, head_w, head_b, targets);
    CHECK(lf == lp);  // bitwise: scaling by exactly 1.0 is an identity
  };
  run(float{});
  run(double{});
}

TEST_CASE("live gates diverge from pass-through once a gate weight moves") {
  ModelConfig cfg = small_config();
  TokenBatch batch = random_batch(3, 3, 6, cfg.vocab_size, Rng(6));
  const std::vector<int> targets{1, 0, 1};
  Backbone<double> bb = init_backbone<double>(cfg, Rng(7));
  bb.visit([](const std::string&, Tensor<double>& t) { t.requires_grad = false; });
  Rng hr(8);
  Tensor<double> head_w = Tensor<double>::randn({cfg.model_dim, 2}, hr, 0.5);
  Tensor<double> head_b = Tensor<double>::zeros({2});

  GatingModule<double> gated(cfg, GateMode::apt, Rng(9));
  GatingModule<double> plain(cfg, GateMode::pt2, Rng(9));
  // untouched apt gates at init: alpha=0.5 and lambda=1 already scale the
  // prefix, so the losses must differ
  double l_init = loss_with_module(gated, bb, batch, head_w, head_b, targets);
  double l_pt2 = loss_with_module(plain, bb, batch, head_w, head_b, targets);
  CHECK(l_init != l_pt2);

  for (auto& g : gated.gate_params())
    for (auto& x : g.w.data) x = 0.3;
  double l_moved = loss_with_module(gated, bb, batch, head_w, head_b, targets);
  CHECK(l_moved != l_init);
}

TEST_CASE("token gates start at exactly 0.5 and lambda at 1") {
  ModelConfig cfg = small_config();
  Backbone<double> bb = init_backbone<double>(cfg, Rng(10));
  TokenBatch batch = random_batch(2, 3, 5, cfg.vocab_size, Rng(11));

  GatingModule<double> module(cfg, GateMode::apt, Rng(12));
  for (auto& g : module.gate_params()) CHECK(g.lambda.data[0] == 1.0);

  std::vector<std::vector<int>> sink;
  module.set_alpha_sink(&sink);
  Tape<double> tape;
  module.attach(tape);
  (void)encode(tape, batch, module.config(), bb, &module);
  REQUIRE(int(sink.size()) == cfg.num_layers);
  for (const auto& layerel : sink) {
    REQUIRE(int(layerel.size()) == batch.batch);
    for (int id : layerel)
      for (double a : tape.value(id).data) CHECK(a == 0.5);
  }
}

TEST_CASE("alpha depends on each example's first token") {
  ModelConfig cfg = small_config();
  Backbone<double> bb = init_backbone<double>(cfg, Rng(13));
  TokenBatch batch = TokenBatch::from_rows({{3, 4, 5}, {9, 4, 5}}, 0);

  GatingModule<double> module(cfg, GateMode::apt, Rng(14));
  for (auto& g : module.gate_params())
    for (size_t i = 0; i < g.w.data.size(); ++i)
      g.w.data[i] = 0.05 * double(i % 7) - 0.1;

  std::vector<std::vector<int>> sink;
  module.set_alpha_sink(&sink);
  Tape<double> tape;
  module.attach(tape);
  auto state = encode(tape, batch, module.config(), bb, &module);
  CHECK(tape.value(sink[0][0]).data != tape.value(sink[0][1]).data);

  // the gate context is the raw first-token hidden state of the previous layer
  for (int layer = 0; layer < cfg.num_layers; ++layer) {
    Tensor<double> h = state.materialize(tape, layer);
    const auto& w = module.gate_params()[size_t(layer)].w;
    for (int e = 0; e < batch.batch; ++e) {
      const auto& alpha = tape.value(sink[size_t(layer)][size_t(e)]).data;
      for (int j = 0; j < cfg.prefix_len_at(layer); ++j) {
        double dot = 0.0;
        for (int c = 0; c < cfg.model_dim; ++c)
          dot += h.data[size_t(e) * size_t(batch.seq) * size_t(cfg.model_dim) + c] *
                 w.at(c, j);
        CHECK(alpha[size_t(j)] ==
              doctest::Approx(1.0 / (1.0 + std::exp(-dot))).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("example-independent modes reuse one gated node per layer") {
  ModelConfig cfg = small_config();
  Backbone<double> bb = init_backbone<double>(cfg, Rng(15));
  TokenBatch batch = random_batch(4, 3, 5, cfg.vocab_size, Rng(16));

  GatingModule<double> module(cfg, GateMode::no_hidden, Rng(17));
  std::vector<std::vector<int>> sink;
  module.set_alpha_sink(&sink);
  Tape<double> tape;
  module.attach(tape);
  (void)encode(tape, batch, module.config(), bb, &module);
  for (const auto& layerel : sink) {
    REQUIRE(layerel.size() == 4);
    for (int id : layerel) CHECK(id == layerel[0]);
  }
}

TEST_CASE("a zero-length layer simply has no prefix") {
  ModelConfig cfg = small_config();
  cfg.layer_prefix_len = {0, 2};
  Backbone<double> bb = init_backbone<double>(cfg, Rng(18));
  TokenBatch batch = random_batch(2, 3, 5, cfg.vocab_size, Rng(19));

  GatingModule<double> module(cfg, GateMode::apt, Rng(20));
  std::vector<std::vector<int>> sink;
  module.set_alpha_sink(&sink);
  Tape<double> tape;
  module.attach(tape);
  CHECK_NOTHROW((void)encode(tape, batch, module.config(), bb, &module));
  CHECK(sink[0].empty());
  CHECK(sink[1].size() == 2);
}

TEST_CASE("using a module without attach is a contract violation") {
  ModelConfig cfg = small_config();
  Backbone<double> bb = init_backbone<double>(cfg, Rng(21));
  TokenBatch batch = random_batch(1, 3, 3, cfg.vocab_size, Rng(22));
  GatingModule<double> module(cfg, GateMode::apt, Rng(23));
  Tape<double> tape;
  CHECK_THROWS_AS((void)encode(tape, batch, module.config(), bb, &module),
                  ContractViolation);
}

TEST_CASE("gate and prefix gradients agree with finite differences") {
  ModelConfig cfg;
  cfg.num_layers = 2;
  cfg.num_heads = 2;
  cfg.model_dim = 6;
  cfg.ffn_dim = 8;
  cfg.vocab_size = 9;
  cfg.max_seq_len = 6;
  cfg.prefix_len = 2;

  TokenBatch batch = random_batch(2, 3, 4, cfg.vocab_size, Rng(24));
  const std::vector<int> targets{1, 0};

  for (GateMode mode : {GateMode::apt, GateMode::no_token_gate, GateMode::no_layer_gate,
                        GateMode::no_hidden, GateMode::pt2}) {
    CAPTURE(gate_mode_name(mode));
    Backbone<double> bb = init_backbone<double>(cfg, Rng(25));
    bb.visit([](const std::string&, Tensor<double>& t) { t.requires_grad = false; });
    Rng hr(26);
    Tensor<double> head_w = Tensor<double>::randn({cfg.model_dim, 2}, hr, 0.5);
    Tensor<double> head_b = Tensor<double>::zeros({2});
    head_w.requires_grad = head_b.requires_grad = true;

    GatingModule<double> module(cfg, mode, Rng(27));
    // move the gates off their symmetric init so gradients are generic
    Rng pr(28);
    module.visit([&](const std::string&, Tensor<double>& t) {
      for (auto& x : t.data) x += 0.2 * pr.next_normal();
    });

    auto forward = [&](Tape<double>& t) {
      module.attach(t);
      auto state = encode(t, batch, module.config(), bb, &module);
      int logits =
          testutil::sequence_logits(t, state, t.leaf(head_w), t.leaf(head_b));
      return t.cross_entropy(logits, targets);
    };

    Tape<double> tape;
    tape.backward(forward(tape));
    bb.visit([](const std::string&, Tensor<double>& t) { CHECK_FALSE(t.has_grad()); });

    auto eval = [&]() {
      Tape<double> t;
      return t.value(forward(t)).data[0];
    };
    module.visit([&](const std::string& name, Tensor<double>& p) {
      CAPTURE(name);
      REQUIRE(p.has_grad());
      auto numeric = finite_diff_grad(eval, p, 1e-5);
      CHECK(max_rel_err(p.grad, numeric, 1e-4) < 1e-5);
    });
    for (Tensor<double>* p : {&head_w, &head_b}) {
      auto numeric = finite_diff_grad(eval, *p, 1e-5);
      CHECK(max_rel_err(p->grad, numeric, 1e-4) < 1e-5);
    }
  }
}
