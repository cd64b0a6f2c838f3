#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <vector>

#include "apt/gradcheck.hpp"
#include "apt/rng.hpp"
#include "apt/tape.hpp"
#include "apt/tensor.hpp"
#include "doctest.h"

using apt::Rng;
using apt::Shape;
using apt::Tape;
using apt::Tensor;

namespace {

template <typename T>
Tensor<T> randn_param(Shape s, Rng rng, double stddev = 1.0) {
  Tensor<T> t = Tensor<T>::randn(std::move(s), rng, stddev);
  t.requires_grad = true;
  return t;
}

}  // namespace

TEST_CASE("matmul forward matches hand result") {
  Tensor<double> a({2, 2}, {1, 2, 3, 4});
  Tensor<double> b({2, 2}, {5, 6, 7, 8});
  Tape<double> t;
  int c = t.matmul(t.leaf(a), t.leaf(b));
  CHECK(t.value(c).data == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("elementwise and broadcast ops match hand results") {
  Tape<double> t;
  Tensor<double> a({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor<double> b({2, 3}, {10, 20, 30, 40, 50, 60});
  int ia = t.leaf(a), ib = t.leaf(b);
  CHECK(t.value(t.add(ia, ib)).data == std::vector<double>{11, 22, 33, 44, 55, 66});
  CHECK(t.value(t.mul(ia, ib)).data == std::vector<double>{10, 40, 90, 160, 250, 360});
  CHECK(t.value(t.scale(ia, 2.0)).data == std::vector<double>{2, 4, 6, 8, 10, 12});
  CHECK(t.value(t.transpose(ia)).data == std::vector<double>{1, 4, 2, 5, 3, 6});

  Tensor<double> v({3}, {100, 200, 300});
  int iv = t.leaf(v);
  CHECK(t.value(t.add_rowvec(ia, iv)).data ==
        std::vector<double>{101, 202, 303, 104, 205, 306});

  Tensor<double> r({2}, {2, -1});
  int ir = t.leaf(r);
  CHECK(t.value(t.scale_rows(ia, ir)).data == std::vector<double>{2, 4, 6, -4, -5, -6});

  Tensor<double> s({1}, {3.0});
  CHECK(t.value(t.mul_scalar(ia, t.leaf(s))).data ==
        std::vector<double>{3, 6, 9, 12, 15, 18});

  CHECK(t.value(t.relu(t.leaf(r))).data == std::vector<double>{2, 0});
  CHECK(t.value(t.sigmoid(t.constant({1}, {0.0}))).data[0] == 0.5);
  CHECK(t.value(t.sum(ia)).data[0] == 21.0);
  CHECK(t.value(t.reshape(ia, {3, 2})).shape == Shape{3, 2});
}

TEST_CASE("softmax rows matches closed form") {
  Tape<double> t;
  int x = t.constant({1, 2}, {0.0, std::log(3.0)});
  const auto& y = t.value(t.softmax_rows(x)).data;
  CHECK(y[0] == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("layer_norm normalizes a hand row") {
  Tape<double> t;
  int x = t.constant({1, 2}, {1.0, 3.0});
  int g = t.constant({2}, {1.0, 1.0});
  int b = t.constant({2}, {0.5, 0.5});
  // mean 2, var 1 -> normalized (-1, 1) / sqrt(1 + eps), plus bias
  const double eps = 1e-5;
  const auto& y = t.value(t.layer_norm(x, g, b, eps)).data;
  const double inv = 1.0 / std::sqrt(1.0 + eps);
  CHECK(y[0] == doctest::Approx(-inv + 0.5).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(inv + 0.5).epsilon(1e-14));
}

TEST_CASE("concat and slices move the right blocks") {
  Tape<double> t;
  int a = t.constant({1, 2}, {1, 2});
  int b = t.constant({2, 2}, {3, 4, 5, 6});
  int v = t.concat({a, b}, 0);
  CHECK(t.value(v).shape == Shape{3, 2});
  CHECK(t.value(v).data == std::vector<double>{1, 2, 3, 4, 5, 6});

  int c = t.constant({2, 1}, {7, 8});
  int h = t.concat({b, c}, 1);
  CHECK(t.value(h).shape == Shape{2, 3});
  CHECK(t.value(h).data == std::vector<double>{3, 4, 7, 5, 6, 8});

  CHECK(t.value(t.slice_rows(v, 1, 3)).data == std::vector<double>{3, 4, 5, 6});
  CHECK(t.value(t.slice_cols(h, 2, 3)).data == std::vector<double>{7, 8});
}

TEST_CASE("embedding gathers rows") {
  Tape<double> t;
  Tensor<double> table({3, 2}, {0, 1, 10, 11, 20, 21});
  int e = t.embedding(t.leaf(table), {2, 0, 2});
  CHECK(t.value(e).shape == Shape{3, 2});
  CHECK(t.value(e).data == std::vector<double>{20, 21, 0, 1, 20, 21});
}

TEST_CASE("cross_entropy matches hand values") {
  Tape<double> t;
  int l1 = t.constant({1, 2}, {0.0, 0.0});
  CHECK(t.value(t.cross_entropy(l1, {0})).data[0] ==
        doctest::Approx(std::log(2.0)).epsilon(1e-14));

  int l2 = t.constant({1, 2}, {0.0, std::log(3.0)});  // probs (0.25, 0.75)
  CHECK(t.value(t.cross_entropy(l2, {1})).data[0] ==
        doctest::Approx(-std::log(0.75)).epsilon(1e-14));

  // mean over rows
  int l3 = t.constant({2, 2}, {0.0, 0.0, 0.0, std::log(3.0)});
  CHECK(t.value(t.cross_entropy(l3, {0, 1})).data[0] ==
        doctest::Approx(0.5 * (std::log(2.0) - std::log(0.75))).epsilon(1e-14));
}

TEST_CASE("shape and input validation") {
  Tape<double> t;
  Tensor<double> a({2, 3}, std::vector<double>(6, 1.0));
  Tensor<double> b({2, 3}, std::vector<double>(6, 1.0));
  int ia = t.leaf(a), ib = t.leaf(b);
  CHECK_THROWS_AS((void)t.matmul(ia, ib), apt::RejectedInput);
  Tensor<double> c({3, 3}, std::vector<double>(9, 1.0));
  CHECK_THROWS_AS((void)t.add(ia, t.leaf(c)), apt::RejectedInput);
  CHECK_THROWS_AS((void)t.scale_rows(ia, t.constant({3}, {1, 2, 3})), apt::RejectedInput);
  CHECK_THROWS_AS((void)t.mul_scalar(ia, ib), apt::RejectedInput);
  CHECK_THROWS_AS((void)t.concat({ia, t.leaf(c)}, 1), apt::RejectedInput);
  CHECK_THROWS_AS((void)t.embedding(ia, {5}), apt::RejectedInput);
  CHECK_THROWS_AS((void)t.cross_entropy(ia, {0, 3}), apt::RejectedInput);
  CHECK_THROWS_AS((void)t.reshape(ia, {4, 4}), apt::RejectedInput);

  int nan_in = t.constant({1, 2}, {0.0, std::numeric_limits<double>::quiet_NaN()});
  CHECK_THROWS_AS((void)t.softmax_rows(nan_in), apt::RejectedInput);

  CHECK_THROWS_AS(t.backward(ia), apt::ContractViolation);  // non-scalar loss
}

TEST_CASE("backward bookkeeping: freezing, accumulation, reachability") {
  Tensor<double> w({2, 2}, {1, 2, 3, 4});
  w.requires_grad = true;
  Tensor<double> frozen({2, 2}, {1, 1, 1, 1});  // requires_grad stays false

  Tape<double> t;
  int iw = t.leaf(w), ifr = t.leaf(frozen);
  int unused = t.scale(ifr, 5.0);  // not connected to the loss
  int loss = t.sum(t.mul(iw, ifr));
  t.backward(loss);
  CHECK(w.grad == std::vector<double>{1, 1, 1, 1});
  CHECK_FALSE(frozen.has_grad());
  CHECK(t.node_grad(unused).empty());

  t.backward(loss);  // second pass accumulates into the same slot
  CHECK(w.grad == std::vector<double>{2, 2, 2, 2});

  // a loss with no trainable inputs is a silent no-op
  Tape<double> t2;
  int c = t2.constant({1}, {3.0});
  t2.backward(c);
  CHECK(t2.node_grad(c).empty());
}

TEST_CASE("reused node accumulates gradient through both paths") {
  Tensor<double> x({2}, {3.0, -1.5});
  x.requires_grad = true;
  Tape<double> t;
  int ix = t.leaf(x);
  int y = t.add(ix, ix);  // dy/dx = 2
  t.backward(t.sum(y));
  CHECK(x.grad == std::vector<double>{2, 2});
}

// Property test: a graph touching every op, every leaf checked against
// central differences. Small extents keep the finite-difference loop cheap.
TEST_CASE("gradients agree with finite differences across seeds (f64)") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    Tensor<double> table = randn_param<double>({7, 4}, rng.fork("table"));
    Tensor<double> gain = randn_param<double>({4}, rng.fork("gain"), 0.5);
    Tensor<double> bias = randn_param<double>({4}, rng.fork("bias"), 0.5);
    Tensor<double> w1 = randn_param<double>({4, 3}, rng.fork("w1"));
    Tensor<double> b1 = randn_param<double>({3}, rng.fork("b1"));
    Tensor<double> vrow = randn_param<double>({3}, rng.fork("vrow"));
    Tensor<double> sc({1}, {1.0 + rng.fork("sc").next_double()});
    sc.requires_grad = true;
    Tensor<double> w2 = randn_param<double>({2, 4}, rng.fork("w2"));
    const std::vector<int> ids{2, 0, 5};
    const std::vector<int> targets{1, 0, 1, 0};

    auto forward = [&](Tape<double>& t) {
      int x = t.layer_norm(t.embedding(t.leaf(table), ids), t.leaf(gain), t.leaf(bias));
      int h = t.relu(t.add_rowvec(t.matmul(x, t.leaf(w1)), t.leaf(b1)));
      int g = t.mul(h, t.sigmoid(h));
      int hs = t.scale_rows(g, t.leaf(vrow));
      int hm = t.mul_scalar(hs, t.leaf(sc));
      int left = t.slice_cols(hm, 0, 2);
      int right = t.slice_cols(hm, 1, 3);
      int wide = t.concat({left, right}, 1);                        // 3 x 4
      int tall = t.concat({t.slice_rows(wide, 0, 1), wide}, 0);     // 4 x 4
      int sm = t.softmax_rows(tall);
      int logits = t.matmul(sm, t.transpose(t.leaf(w2)));           // 4 x 2
      int ce = t.cross_entropy(logits, targets);
      return t.add(ce, t.scale(t.sum(t.reshape(hm, {1, 9})), 0.01));
    };

    Tape<double> tape;
    int loss = forward(tape);
    tape.backward(loss);

    auto eval = [&]() {
      Tape<double> t;
      return t.value(forward(t)).data[0];
    };
    for (Tensor<double>* p : {&table, &gain, &bias, &w1, &b1, &vrow, &sc, &w2}) {
      REQUIRE(p->has_grad());
      auto numeric = apt::finite_diff_grad(eval, *p, 1e-5);
      CHECK(apt::max_rel_err(p->grad, numeric, 1e-4) < 1e-6);
    }
  }
}

TEST_CASE("gradients agree with finite differences in f32") {
  for (uint64_t seed = 100; seed < 105; ++seed) {
    Rng rng(seed);
    Tensor<float> a = randn_param<float>({3, 4}, rng.fork("a"));
    Tensor<float> w = randn_param<float>({4, 2}, rng.fork("w"));
    const std::vector<int> targets{0, 1, 0};
    auto forward = [&](Tape<float>& t) {
      return t.cross_entropy(t.matmul(t.leaf(a), t.leaf(w)), targets);
    };
    Tape<float> tape;
    tape.backward(forward(tape));
    auto eval = [&]() {
      Tape<float> t;
      return t.value(forward(t)).data[0];
    };
    for (Tensor<float>* p : {&a, &w}) {
      auto numeric = apt::finite_diff_grad(eval, *p, 1e-2f);
      CHECK(apt::max_rel_err(p->grad, numeric, 1e-1) < 1e-2);
    }
  }
}

TEST_CASE("layer_norm gain/bias gradients via finite differences") {
  Rng rng(7);
  Tensor<double> x = randn_param<double>({5, 6}, rng.fork("x"));
  Tensor<double> g = randn_param<double>({6}, rng.fork("g"), 0.5);
  Tensor<double> b = randn_param<double>({6}, rng.fork("b"), 0.5);
  auto forward = [&](Tape<double>& t) {
    return t.sum(t.sigmoid(t.layer_norm(t.leaf(x), t.leaf(g), t.leaf(b))));
  };
  Tape<double> tape;
  tape.backward(forward(tape));
  auto eval = [&]() {
    Tape<double> t;
    return t.value(forward(t)).data[0];
  };
  for (Tensor<double>* p : {&x, &g, &b}) {
    auto numeric = apt::finite_diff_grad(eval, *p, 1e-5);
    CHECK(apt::max_rel_err(p->grad, numeric, 1e-4) < 1e-6);
  }
}

TEST_CASE("embedding gradient scatters into the right rows") {
  Tensor<double> table({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  table.requires_grad = true;
  Tape<double> t;
  int e = t.embedding(t.leaf(table), {1, 1, 3});
  t.backward(t.sum(e));
  CHECK(table.grad == std::vector<double>{0, 0, 2, 2, 0, 0, 1, 1});
}
