#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "ols/adam.hpp"
#include "ols/autodiff.hpp"
#include "ols/gumbel.hpp"
#include "ols/rng.hpp"
#include "ols/tensor.hpp"

using namespace ols;

TEST_CASE("tensor shape/data invariants") {
  CHECK_THROWS(Tensor({2, 2}, {1.0, 2.0, 3.0}));
  CHECK_THROWS(Tensor({2}, {1.0, std::nan("")}));
  CHECK_THROWS(Tensor({0}, {}));
  const Tensor t = Tensor::from_matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.at2(1, 2) == 6.0);
}

TEST_CASE("linear forward matches hand computation") {
  const LayerParams lin =
      LayerParams::linear(Tensor::from_matrix(1, 2, {1.0, -1.0}), Tensor::from_vector({0.0}));
  Tape tape;
  const int in = tape.leaf(Tensor::from_vector({2.0, 3.0}));
  const int out = layer_forward(tape, lin, in);
  CHECK(tape.value(out).at(0) == doctest::Approx(-1.0));
}

TEST_CASE("relu forward") {
  Tape tape;
  const int in = tape.leaf(Tensor::from_vector({-1.0, 0.0, 2.0}));
  const int out = layer_forward(tape, LayerParams::relu(), in);
  CHECK(tape.value(out).data == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("1x1 conv with unit weight is the identity") {
  const LayerParams conv = LayerParams::conv2d(Tensor({1, 1, 1, 1}, {1.0}),
                                               Tensor::from_vector({0.0}), 1, 3, 4, 1, 0);
  Rng rng(7);
  Tensor img = Tensor::zeros({1, 3, 4});
  for (double& v : img.data) v = rng.uniform(-1, 1);
  const Tensor out = conv2d_forward(conv, img);
  CHECK(max_abs_diff(out, img) == 0.0);
}

TEST_CASE("layer shape mismatch is rejected with a dimension report") {
  const LayerParams lin =
      LayerParams::linear(Tensor::from_matrix(1, 2, {1.0, -1.0}), Tensor::from_vector({0.0}));
  Tape tape;
  const int in = tape.leaf(Tensor::from_vector({1.0, 2.0, 3.0}));
  CHECK_THROWS_WITH_AS(layer_forward(tape, lin, in),
                       doctest::Contains("incompatible shapes"), std::invalid_argument);
  CHECK_THROWS(LayerParams::rnn_cell(Tensor::from_matrix(2, 3, {1, 2, 3, 4, 5, 6}),
                                     Tensor::from_matrix(3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9}),
                                     Tensor::from_vector({1, 2, 3}),
                                     Tensor::from_matrix(2, 3, {1, 2, 3, 4, 5, 6}),
                                     Tensor::from_vector({1, 2})));
}

TEST_CASE("linear backward: input gradient is W^T seed") {
  const LayerParams lin =
      LayerParams::linear(Tensor::from_matrix(1, 2, {1.0, -1.0}), Tensor::from_vector({0.0}));
  Tape tape;
  const int in = tape.leaf(Tensor::from_vector({2.0, 3.0}));
  const int out = layer_forward(tape, lin, in);
  const auto grads = tape.backward(out, Tensor::from_vector({1.0}));
  CHECK(grads.at(in).data == std::vector<double>{1.0, -1.0});
}

TEST_CASE("relu backward: subgradient 0 at negatives and at 0") {
  Tape tape;
  const int in = tape.leaf(Tensor::from_vector({-1.0, 2.0}));
  const int out = tape.relu(in);
  const auto grads = tape.backward(out, Tensor::from_vector({1.0, 1.0}));
  CHECK(grads.at(in).data == std::vector<double>{0.0, 1.0});

  Tape tape0;
  const int z = tape0.leaf(Tensor::from_vector({0.0}));
  const auto g0 = tape0.backward(tape0.relu(z), Tensor::from_vector({1.0}));
  CHECK(g0.at(z).at(0) == 0.0);
}

TEST_CASE("backward rejects a seed of the wrong shape") {
  Tape tape;
  const int in = tape.leaf(Tensor::from_vector({1.0, 2.0}));
  const int out = tape.relu(in);
  CHECK_THROWS_AS(tape.backward(out, Tensor::from_vector({1.0})), std::invalid_argument);
}

namespace {

// Small random Linear-ReLU-Linear scalar function used by the FD checks.
ScalarFn random_mlp_loss(std::uint64_t seed, std::int64_t dim) {
  Rng rng(seed);
  auto mat = [&rng](std::int64_t r, std::int64_t c) {
    Tensor t = Tensor::zeros({r, c});
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
  };
  Tensor w1 = mat(3, dim), b1 = mat(3, 1), w2 = mat(1, 3), b2 = mat(1, 1);
  b1.shape = {3};
  b2.shape = {1};
  auto build = [w1, b1, w2, b2](Tape& tape, int x) {
    const int l1 = tape.affine(tape.leaf(w1, false), tape.leaf(b1, false), x);
    const int r1 = tape.relu(l1);
    const int l2 = tape.affine(tape.leaf(w2, false), tape.leaf(b2, false), r1);
    return tape.sum_all(l2);
  };
  ScalarFn f;
  f.value = [build](const Tensor& x) {
    Tape tape;
    const int leaf = tape.leaf(x);
    return tape.value(build(tape, leaf)).at(0);
  };
  f.gradient = [build](const Tensor& x) {
    Tape tape;
    const int leaf = tape.leaf(x);
    const int out = build(tape, leaf);
    return tape.backward(out, Tensor::scalar(1.0)).at(leaf);
  };
  return f;
}

}  // namespace

TEST_CASE("composite Linear-ReLU gradients match finite differences") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const ScalarFn f = random_mlp_loss(1000 + static_cast<std::uint64_t>(trial), 4);
    Tensor x = Tensor::zeros({4});
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    CHECK(finite_diff_check(f, x) < 1e-4);
  }
}

TEST_CASE("finite_diff_check on x^2 and on a corrupted gradient") {
  ScalarFn square;
  square.value = [](const Tensor& x) { return x.at(0) * x.at(0); };
  square.gradient = [](const Tensor& x) { return Tensor::from_vector({2.0 * x.at(0)}); };
  CHECK(finite_diff_check(square, Tensor::from_vector({3.0})) <= 1e-7);

  ScalarFn corrupted = square;
  corrupted.gradient = [](const Tensor& x) { return Tensor::from_vector({2.0 * x.at(0) + 1.0}); };
  CHECK(finite_diff_check(corrupted, Tensor::from_vector({3.0})) >= 0.1);
}

TEST_CASE("finite_diff_check rejects non-finite function values") {
  ScalarFn bad;
  bad.value = [](const Tensor& x) { return std::log(x.at(0)); };
  bad.gradient = [](const Tensor& x) { return Tensor::from_vector({1.0 / x.at(0)}); };
  CHECK_THROWS_AS(finite_diff_check(bad, Tensor::from_vector({0.0})), std::domain_error);
}

TEST_CASE("every layer kind matches finite differences over random draws") {
  // Spec invariant: 100 random parameter draws across the layer set, 1e-4.
  int done = 0;
  for (int trial = 0; done < 100; ++trial) {
    const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(trial);
    Rng wr(seed);
    auto mat = [&wr](std::int64_t r, std::int64_t c) {
      Tensor t = Tensor::zeros({r, c});
      for (double& v : t.data) v = wr.uniform(-1.0, 1.0);
      return t;
    };
    const int kind = trial % 4;
    ScalarFn f;
    if (kind == 0) {  // Linear
      Tensor w = mat(3, 4), b = mat(3, 1);
      b.shape = {3};
      f.value = [w, b](const Tensor& x) {
        Tape t;
        return t.value(t.sum_all(t.affine(t.leaf(w, false), t.leaf(b, false), t.leaf(x)))).at(0);
      };
      f.gradient = [w, b](const Tensor& x) {
        Tape t;
        const int leaf = t.leaf(x);
        const int out = t.sum_all(t.affine(t.leaf(w, false), t.leaf(b, false), leaf));
        return t.backward(out, Tensor::scalar(1.0)).at(leaf);
      };
      Tensor x = mat(4, 1);
      x.shape = {4};
      CHECK(finite_diff_check(f, x) < 1e-4);
    } else if (kind == 1) {  // Conv2D
      Tensor w = mat(2, 1 * 3 * 3);
      w.shape = {2, 1, 3, 3};
      Tensor b = mat(2, 1);
      b.shape = {2};
      f.value = [w, b](const Tensor& x) {
        Tape t;
        return t
            .value(t.sum_all(t.conv2d(t.leaf(w, false), t.leaf(b, false), t.leaf(x), 1, 4, 5, 2, 1)))
            .at(0);
      };
      f.gradient = [w, b](const Tensor& x) {
        Tape t;
        const int leaf = t.leaf(x);
        const int out = t.sum_all(t.conv2d(t.leaf(w, false), t.leaf(b, false), leaf, 1, 4, 5, 2, 1));
        return t.backward(out, Tensor::scalar(1.0)).at(leaf);
      };
      Tensor x = mat(1, 20);
      x.shape = {1, 4, 5};
      CHECK(finite_diff_check(f, x) < 1e-4);
    } else if (kind == 2) {  // RNNCellReLU, gradient w.r.t. the input
      Tensor bh = mat(3, 1), bo = mat(4, 1);
      bh.shape = {3};
      bo.shape = {4};
      const LayerParams cell = LayerParams::rnn_cell(mat(3, 2), mat(3, 3), bh, mat(4, 3), bo);
      Tensor x0 = mat(2, 1);
      x0.shape = {2};
      Tensor h0 = mat(3, 1);
      h0.shape = {3};
      // Skip draws where some pre-activation sits within the FD step of 0.
      const Tensor pre = add(add(matvec(cell.w_ih, x0), matvec(cell.w_hh, h0)), cell.b_h);
      bool near_kink = false;
      for (double v : pre.data) near_kink |= std::abs(v) < 1e-3;
      if (near_kink) continue;
      f.value = [cell, h0](const Tensor& x) {
        Tape t;
        auto [o, h] = rnn_cell_forward(t, cell, t.leaf(x), t.leaf(h0, false));
        return t.value(t.sum_all(o)).at(0) + t.value(t.sum_all(h)).at(0);
      };
      f.gradient = [cell, h0](const Tensor& x) {
        Tape t;
        const int leaf = t.leaf(x);
        auto [o, h] = rnn_cell_forward(t, cell, leaf, t.leaf(h0, false));
        const int out = t.add(t.sum_all(o), t.sum_all(h));
        return t.backward(out, Tensor::scalar(1.0)).at(leaf);
      };
      CHECK(finite_diff_check(f, x0) < 1e-4);
    } else {  // Embedding mixture
      Tensor emb = mat(5, 3);
      f.value = [emb](const Tensor& x) {
        Tape t;
        return t.value(t.sum_all(t.vecmat(t.leaf(x), t.leaf(emb, false)))).at(0);
      };
      f.gradient = [emb](const Tensor& x) {
        Tape t;
        const int leaf = t.leaf(x);
        const int out = t.sum_all(t.vecmat(leaf, t.leaf(emb, false)));
        return t.backward(out, Tensor::scalar(1.0)).at(leaf);
      };
      Tensor x = mat(5, 1);
      x.shape = {5};
      CHECK(finite_diff_check(f, x) < 1e-4);
    }
    ++done;
  }
}

TEST_CASE("forward passes are deterministic") {
  const LayerParams cell = [] {
    Rng wr(99);
    auto mat = [&wr](std::int64_t r, std::int64_t c) {
      Tensor t = Tensor::zeros({r, c});
      for (double& v : t.data) v = wr.uniform(-1.0, 1.0);
      return t;
    };
    Tensor b = mat(3, 1);
    b.shape = {3};
    Tensor bo = mat(2, 1);
    bo.shape = {2};
    return LayerParams::rnn_cell(mat(3, 2), mat(3, 3), b, mat(2, 3), bo);
  }();
  const Tensor x = Tensor::from_vector({0.3, -0.7});
  const Tensor h = Tensor::from_vector({0.1, 0.2, -0.3});
  Tape t1, t2;
  auto [o1, h1] = rnn_cell_forward(t1, cell, t1.leaf(x), t1.leaf(h));
  auto [o2, h2] = rnn_cell_forward(t2, cell, t2.leaf(x), t2.leaf(h));
  CHECK(t1.value(o1).data == t2.value(o2).data);
  CHECK(t1.value(h1).data == t2.value(h2).data);
}

TEST_CASE("adam: zero gradient is the identity on parameters") {
  AdamState state(AdamConfig{0.05, 0.9, 0.999, 1e-8});
  std::vector<Tensor> params = {Tensor::from_vector({1.0, -2.0, 3.0})};
  const std::vector<Tensor> grads = {Tensor::zeros({3})};
  for (int i = 0; i < 5; ++i) REQUIRE(adam_step(state, params, grads));
  CHECK(params[0].data == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("adam: bias-corrected first step has magnitude ~ lr") {
  AdamState state(AdamConfig{0.01, 0.9, 0.999, 1e-8});
  std::vector<Tensor> params = {Tensor::from_vector({0.0, 0.0})};
  const std::vector<Tensor> grads = {Tensor::from_vector({3.0, -0.25})};
  REQUIRE(adam_step(state, params, grads));
  CHECK(params[0].at(0) == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(params[0].at(1) == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("adam: 200 steps on (x-1)^2 converge near 1") {
  AdamState state(AdamConfig{0.05, 0.9, 0.999, 1e-8});
  std::vector<Tensor> params = {Tensor::from_vector({0.0})};
  for (int i = 0; i < 200; ++i) {
    const std::vector<Tensor> grads = {Tensor::from_vector({2.0 * (params[0].at(0) - 1.0)})};
    REQUIRE(adam_step(state, params, grads));
  }
  CHECK(std::abs(params[0].at(0) - 1.0) < 0.05);
}

TEST_CASE("adam: non-finite gradient rejects the step") {
  AdamState state;
  std::vector<Tensor> params = {Tensor::from_vector({1.0})};
  std::vector<Tensor> grads = {Tensor::from_vector({1.0})};
  grads[0].data[0] = std::numeric_limits<double>::infinity();
  CHECK_FALSE(adam_step(state, params, grads));
  CHECK(params[0].at(0) == 1.0);
  CHECK(state.step == 0);
}

TEST_CASE("gumbel samples live on the simplex for all taus") {
  for (double tau : {0.01, 0.1, 1.0, 10.0}) {
    Rng rng(2024);
    for (int i = 0; i < 50; ++i) {
      const Tensor pi = Tensor::from_vector({0.5, -1.0, 2.0, 0.0});
      const Tensor s = gumbel_softmax_sample(pi, tau, rng);
      double total = 0.0;
      for (double v : s.data) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("equal gumbel noise preserves the pi ordering") {
  const Tensor pi = Tensor::from_vector({0.2, 1.4, -0.3});
  const Tensor noise = Tensor::full({3}, 0.7);
  const Tensor s = gumbel_softmax_with_noise(pi, 0.5, noise);
  CHECK(argmax_lowest(s) == argmax_lowest(pi));
}

TEST_CASE("gumbel rejects tau <= 0") {
  Rng rng(1);
  CHECK_THROWS_AS(gumbel_softmax_sample(Tensor::from_vector({1.0, -1.0}), 0.0, rng),
                  std::invalid_argument);
}

TEST_CASE("low-temperature gumbel matches the categorical rate") {
  // pi = [1, -1] as in the discrete-attack initialization; at tau = 0.01 the
  // sample is effectively one-hot and the argmax follows p = softmax(pi).
  const Tensor pi = Tensor::from_vector({1.0, -1.0});
  const double p0 = softmax(pi).at(0);
  Rng rng(77);
  int hits = 0, onehot = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const Tensor s = gumbel_softmax_sample(pi, 0.01, rng);
    if (*std::max_element(s.data.begin(), s.data.end()) > 0.99) ++onehot;
    if (s.at(0) > 0.99) ++hits;
  }
  // All but the rare near-tied Gumbel draws collapse to one-hot.
  CHECK(onehot > 950);
  const double freq = static_cast<double>(hits) / n;
  CHECK(freq == doctest::Approx(p0).epsilon(0.05));
}

TEST_CASE("rng streams are stable and splits are independent") {
  Rng a(5), b(5);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c = Rng(5).split("alpha");
  Rng d = Rng(5).split("beta");
  CHECK(c.next_u64() != d.next_u64());
}
