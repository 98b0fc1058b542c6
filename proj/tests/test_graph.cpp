#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ge2ae/graph.hpp"
#include "ge2ae/rng.hpp"
#include "test_util.hpp"

using namespace ge2ae;
using namespace ge2ae::ops;
using testutil::fd_gradcheck;
using testutil::LeafMap;
using testutil::rand_tensor;

TEST_SUITE_BEGIN("graph");

TEST_CASE("scalar multiply") {
  Graph g;
  Value a = g.constant(Tensor::scalar(2.0));
  Value b = g.constant(Tensor::scalar(3.0));
  CHECK((a * b).tensor().scalar_value() == 6.0);
}

TEST_CASE("layer_norm of a constant vector is zero") {
  Graph g;
  Value x = g.constant(Tensor::full({1, 8}, 4.2));
  Value scale = g.constant(Tensor::ones({8}));
  Value shift = g.constant(Tensor::zeros({8}));
  Value y = layer_norm(x, scale, shift);
  for (double v : y.tensor().data) CHECK(v == 0.0);
}

TEST_CASE("matmul equals triple-loop oracle") {
  Rng rng(7);
  const Tensor a = rand_tensor({2, 3}, rng);
  const Tensor b = rand_tensor({3, 4}, rng);
  Graph g;
  Tensor want({2, 4});
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 3; ++k) want.at2(i, j) += a.at2(i, k) * b.at2(k, j);
  const Tensor got = matmul(g.constant(a), g.constant(b)).tensor();
  CHECK(testutil::max_abs_diff(got, want) <= 1e-12);
}

TEST_CASE("backward of x*x at 3 is 6") {
  Graph g;
  Tensor xt = Tensor::scalar(3.0);
  xt.requires_grad = true;
  Value x = g.leaf("x", xt);
  GradMap grads = g.backward(x * x);
  CHECK(grads.at("x").scalar_value() == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("backward of sum(layer_norm(x)) matches central differences") {
  Rng rng(13);
  LeafMap leaves;
  leaves["x"] = rand_tensor({1, 8}, rng);
  const double err = fd_gradcheck(
      [](Graph& g, const LeafMap& p) {
        Value x = g.leaf("x", p.at("x"));
        Value y = layer_norm(x, g.constant(Tensor::ones({8})), g.constant(Tensor::zeros({8})));
        return sum(y * y);  // sum(ln) alone has a near-zero gradient; square it too
      },
      leaves);
  CHECK(err <= 1e-6);
  // And the spec's literal case: loss = sum(layer_norm(x)).
  const double err2 = fd_gradcheck(
      [](Graph& g, const LeafMap& p) {
        Value x = g.leaf("x", p.at("x"));
        return sum(
            layer_norm(x, g.constant(Tensor::ones({8})), g.constant(Tensor::zeros({8}))));
      },
      leaves);
  CHECK(err2 <= 1e-6);
}

TEST_CASE("gradient of sum(softmax(x)) is zero") {
  Rng rng(17);
  Tensor xt = rand_tensor({2, 5}, rng);
  xt.requires_grad = true;
  Graph g;
  Value x = g.leaf("x", xt);
  GradMap grads = g.backward(sum(softmax(x)));
  for (double v : grads.at("x").data) CHECK(std::fabs(v) <= 1e-12);
}

TEST_CASE("every primitive passes the finite-difference gradient check") {
  Rng rng(29);
  auto check3 = [&](const testutil::Builder& b, LeafMap leaves, double tol = 1e-6) {
    for (int trial = 0; trial < 3; ++trial) {
      LeafMap jit = leaves;
      for (auto& [k, t] : jit)
        for (auto& x : t.data) x += rng.uniform(-0.05, 0.05);
      CHECK(fd_gradcheck(b, jit) <= tol);
    }
  };

  LeafMap two;
  two["a"] = rand_tensor({3, 4}, rng, 0.4, 1.5);
  two["b"] = rand_tensor({3, 4}, rng, 0.4, 1.5);
  check3([](Graph& g, const LeafMap& p) {
    return sum(power(g.leaf("a", p.at("a")) + g.leaf("b", p.at("b")), 2.0));
  }, two);
  check3([](Graph& g, const LeafMap& p) {
    return sum(power(g.leaf("a", p.at("a")) - g.leaf("b", p.at("b")), 2.0));
  }, two);
  check3([](Graph& g, const LeafMap& p) {
    return sum(g.leaf("a", p.at("a")) * g.leaf("b", p.at("b")));
  }, two);

  LeafMap mm;
  mm["a"] = rand_tensor({2, 3}, rng);
  mm["b"] = rand_tensor({3, 4}, rng);
  check3([](Graph& g, const LeafMap& p) {
    return sum(power(matmul(g.leaf("a", p.at("a")), g.leaf("b", p.at("b"))), 2.0));
  }, mm);

  LeafMap lin;
  lin["x"] = rand_tensor({3, 4}, rng);
  lin["w"] = rand_tensor({4, 2}, rng);
  lin["b"] = rand_tensor({2}, rng);
  check3([](Graph& g, const LeafMap& p) {
    return sum(power(
        linear(g.leaf("x", p.at("x")), g.leaf("w", p.at("w")), g.leaf("b", p.at("b"))), 2.0));
  }, lin);

  LeafMap one;
  one["x"] = rand_tensor({4, 6}, rng, 0.5, 1.5);
  check3([](Graph& g, const LeafMap& p) {
    Value t = transpose(reshape(g.leaf("x", p.at("x")), {6, 4}));
    return sum(power(concat({slice(t, 1, 0, 2), slice(t, 1, 2, 2)}, 1), 2.0));
  }, one);
  check3([](Graph& g, const LeafMap& p) {
    Value gth = gather_rows(g.leaf("x", p.at("x")), {3, 0, 0, 2});
    return sum(power(scatter_rows(gth, {1, 4, 6, 0}, 8), 2.0));
  }, one);
  check3([](Graph& g, const LeafMap& p) { return mean(power(g.leaf("x", p.at("x")), 2.0)); }, one);
  check3([](Graph& g, const LeafMap& p) { return sum(power(g.leaf("x", p.at("x")), 1.7)); }, one);
  check3([](Graph& g, const LeafMap& p) { return sum(ops::sqrt(g.leaf("x", p.at("x")))); }, one);
  check3([](Graph& g, const LeafMap& p) { return sum(ops::exp(g.leaf("x", p.at("x")))); }, one);
  check3([](Graph& g, const LeafMap& p) { return sum(gelu(g.leaf("x", p.at("x")))); }, one);
  check3([](Graph& g, const LeafMap& p) {
    Value s = softmax(g.leaf("x", p.at("x")));
    return sum(power(s, 2.0));
  }, one);

  LeafMap ln;
  ln["x"] = rand_tensor({3, 5}, rng);
  ln["scale"] = rand_tensor({5}, rng, 0.5, 1.5);
  ln["shift"] = rand_tensor({5}, rng);
  check3([](Graph& g, const LeafMap& p) {
    return sum(power(layer_norm(g.leaf("x", p.at("x")), g.leaf("scale", p.at("scale")),
                                g.leaf("shift", p.at("shift"))),
                     2.0));
  }, ln);

  LeafMap fft;
  fft["x"] = rand_tensor({4, 4, 2}, rng);
  check3([](Graph& g, const LeafMap& p) {
    return sum(power(ops::dft2d(g.leaf("x", p.at("x"))), 2.0));
  }, fft);
  LeafMap ifft;
  ifft["z"] = rand_tensor({2, 4, 4, 2}, rng);
  check3([](Graph& g, const LeafMap& p) {
    return sum(power(ops::idft2d_real(g.leaf("z", p.at("z"))), 2.0));
  }, ifft);
}

TEST_CASE("softmax rows sum to 1; layer_norm rows have zero mean") {
  Rng rng(41);
  Graph g;
  Value s = softmax(g.constant(rand_tensor({6, 9}, rng, -3, 3)));
  const Tensor& st = s.tensor();
  for (int r = 0; r < 6; ++r) {
    double acc = 0.0;
    for (int j = 0; j < 9; ++j) acc += st.at2(r, j);
    CHECK(std::fabs(acc - 1.0) <= 1e-12);
  }
  Value y = layer_norm(g.constant(rand_tensor({6, 9}, rng)), g.constant(Tensor::ones({9})),
                       g.constant(Tensor::zeros({9})));
  const Tensor& yt = y.tensor();
  for (int r = 0; r < 6; ++r) {
    double mu = 0.0;
    for (int j = 0; j < 9; ++j) mu += yt.at2(r, j);
    CHECK(std::fabs(mu / 9.0) <= 1e-10);
  }
}

TEST_CASE("forward determinism and node replay") {
  Rng rng(43);
  const Tensor a = rand_tensor({4, 4}, rng);
  auto build = [&](Graph& g) {
    Value x = g.constant(a);
    Value y = softmax(matmul(x, transpose(x)));
    return sum(gelu(y));
  };
  Graph g1, g2;
  CHECK(build(g1).tensor().data == build(g2).tensor().data);
  // Replaying each node from its recorded inputs reproduces outputs bitwise.
  Value last = build(g1);
  for (int id = 0; id <= last.id; ++id) {
    const Tensor re = g1.recompute(id);
    CHECK(re.data == g1.value(Value{&g1, id}).data);
  }
}

TEST_CASE("shape and kind validation") {
  Graph g;
  Value a = g.constant(Tensor::zeros({2, 3}));
  Value b = g.constant(Tensor::zeros({3, 3}));
  CHECK_THROWS_WITH_AS(a + b, doctest::Contains("[2,3]"), std::invalid_argument);
  CHECK_THROWS_AS(matmul(a, g.constant(Tensor::zeros({2, 2}))), std::invalid_argument);
  CHECK_THROWS_AS(g.apply_primitive("convolve", {a}), std::invalid_argument);
  CHECK_NOTHROW(g.apply_primitive("add", {a, g.constant(Tensor::zeros({2, 3}))}));
  // Non-scalar loss rejection.
  Tensor leaf = Tensor::zeros({2, 2});
  leaf.requires_grad = true;
  Value x = g.leaf("x", leaf);
  CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
}

TEST_CASE("gradients of unused leaves are zeros") {
  Graph g;
  Tensor used = Tensor::scalar(2.0);
  used.requires_grad = true;
  Tensor unused = Tensor::zeros({3});
  unused.requires_grad = true;
  Value x = g.leaf("x", used);
  g.leaf("unused", unused);
  GradMap grads = g.backward(x * x);
  CHECK(grads.at("unused").shape == std::vector<int>{3});
  for (double v : grads.at("unused").data) CHECK(v == 0.0);
}

TEST_CASE("scalar broadcast in elementwise ops") {
  Graph g;
  Value a = g.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Value s = g.constant(Tensor::scalar(10.0));
  const Tensor sum_t = (a + s).tensor();
  CHECK(sum_t.data == std::vector<double>{11, 12, 13, 14});
  const Tensor mul_t = (a * s).tensor();
  CHECK(mul_t.data == std::vector<double>{10, 20, 30, 40});
}

TEST_SUITE_END();
