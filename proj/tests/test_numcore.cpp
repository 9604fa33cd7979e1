#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracle_helpers.hpp"
#include "vinrs/autodiff.hpp"
#include "vinrs/gradcheck.hpp"
#include "vinrs/optim.hpp"
#include "vinrs/rng.hpp"

using namespace vinrs;
using namespace vinrs::nn;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("conv2d scaling identity") {
  auto x = constant(Tensor({1, 3, 3}, 1.0));
  Parameter k(Tensor({1, 1, 1, 1}, {2.0}), "k");
  Parameter b(Tensor({1}, {0.0}), "b");
  auto y = conv2d(x, k.var(), b.var());
  for (int i = 0; i < 9; ++i) CHECK(y->value[i] == doctest::Approx(2.0));
}

TEST_CASE("conv2d impulse response of a box filter") {
  Tensor img({1, 5, 5});
  img.data[2 * 5 + 2] = 1.0;  // impulse at center
  auto x = constant(img);
  Parameter k(Tensor({1, 1, 3, 3}, 1.0), "k");
  Parameter b(Tensor({1}, {0.0}), "b");
  auto y = conv2d(x, k.var(), b.var());
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const bool inside = i >= 1 && i <= 3 && j >= 1 && j <= 3;
      CHECK(y->value[i * 5 + j] == doctest::Approx(inside ? 1.0 : 0.0));
    }
}

TEST_CASE("conv2d matches six-nested-loop oracle") {
  Rng rng(11);
  Tensor xv = random_tensor({2, 5, 5}, rng);
  Tensor kv = random_tensor({3, 2, 3, 3}, rng);
  Tensor bv = random_tensor({3}, rng);
  auto y = conv2d(constant(xv), constant(kv), constant(bv));
  Tensor ref = oracle::conv2d_ref(xv, kv, &bv);
  for (int i = 0; i < ref.numel(); ++i)
    CHECK(std::fabs(y->value[i] - ref[i]) < 1e-12);
}

TEST_CASE("conv2d rejects channel mismatch") {
  auto x = constant(Tensor({2, 4, 4}, 1.0));
  auto k = constant(Tensor({1, 3, 3, 3}, 1.0));
  auto b = constant(Tensor({1}, 0.0));
  CHECK_THROWS(conv2d(x, k, b));
}

TEST_CASE("conv/dense/channel_max agree with oracles over random shapes") {
  Rng rng(202);
  for (int trial = 0; trial < 100; ++trial) {
    const int cin = 1 + static_cast<int>(rng.next_index(3));
    const int cout = 1 + static_cast<int>(rng.next_index(3));
    const int h = 2 + static_cast<int>(rng.next_index(6));
    const int w = 2 + static_cast<int>(rng.next_index(6));
    const int ks = 1 + 2 * static_cast<int>(rng.next_index(3));  // 1,3,5

    Tensor xv = random_tensor({cin, h, w}, rng);
    Tensor kv = random_tensor({cout, cin, ks, ks}, rng);
    Tensor bv = random_tensor({cout}, rng);
    auto conv = conv2d(constant(xv), constant(kv), constant(bv));
    Tensor conv_ref = oracle::conv2d_ref(xv, kv, &bv);
    double err = 0.0;
    for (int i = 0; i < conv_ref.numel(); ++i)
      err = std::max(err, std::fabs(conv->value[i] - conv_ref[i]));
    CHECK(err < 1e-12);

    auto cm = channel_max(constant(xv));
    Tensor mx_ref;
    std::vector<int> am_ref;
    oracle::channel_max_ref(xv, mx_ref, am_ref);
    for (int i = 0; i < mx_ref.numel(); ++i)
      CHECK(cm.values->value[i] == mx_ref[i]);
    CHECK(cm.argmax == am_ref);

    const int n = 1 + static_cast<int>(rng.next_index(10));
    const int m = 1 + static_cast<int>(rng.next_index(10));
    Tensor dx = random_tensor({n}, rng);
    Tensor dw = random_tensor({m, n}, rng);
    Tensor db = random_tensor({m}, rng);
    auto d = dense(constant(dx), constant(dw), constant(db));
    Tensor d_ref = oracle::dense_ref(dx, dw, db);
    for (int i = 0; i < m; ++i) CHECK(std::fabs(d->value[i] - d_ref[i]) < 1e-12);
  }
}

TEST_CASE("channel_max single channel and dominated channel") {
  auto single = channel_max(constant(Tensor({1, 2, 2}, {1, 2, 3, 4})));
  CHECK(single.values->value.data == std::vector<double>{1, 2, 3, 4});
  CHECK(single.argmax == std::vector<int>{0, 0, 0, 0});

  Tensor two({2, 2, 2});
  for (int i = 0; i < 4; ++i) two[i] = 1.0;
  for (int i = 4; i < 8; ++i) two[i] = 2.0;
  auto dominated = channel_max(constant(two));
  for (int i = 0; i < 4; ++i) {
    CHECK(dominated.values->value[i] == 2.0);
    CHECK(dominated.argmax[static_cast<std::size_t>(i)] == 1);
  }
}

TEST_CASE("channel_max backward is a 0/1 mask with H*W ones") {
  Rng rng(7);
  Parameter x(random_tensor({4, 6, 6}, rng), "x");
  auto cm = channel_max(x.var());
  backward(sum(cm.values));
  double total = 0.0;
  for (int i = 0; i < x.gradient().numel(); ++i) {
    const double g = x.gradient()[i];
    CHECK((g == 0.0 || g == 1.0));
    total += g;
  }
  CHECK(total == doctest::Approx(36.0));
}

TEST_CASE("dense identity and zero-weight cases") {
  Tensor id({3, 3});
  for (int i = 0; i < 3; ++i) id.data[static_cast<std::size_t>(i) * 3 + i] = 1.0;
  auto y = dense(constant(Tensor({3}, {4, 5, 6})), constant(id), constant(Tensor({3})));
  CHECK(y->value.data == std::vector<double>{4, 5, 6});

  auto z = dense(constant(Tensor({3}, {4, 5, 6})), constant(Tensor({2, 3})),
                 constant(Tensor({2}, {0.5, -0.5})));
  CHECK(z->value.data == std::vector<double>{0.5, -0.5});

  CHECK_THROWS(dense(constant(Tensor({4})), constant(Tensor({2, 3})),
                     constant(Tensor({2}))));
}

TEST_CASE("backward on sum of a parameter gives ones; scaling by zero gives zeros") {
  Parameter p(Tensor({2, 3}, 1.5), "p");
  backward(sum(p.var()));
  for (int i = 0; i < 6; ++i) CHECK(p.gradient()[i] == 1.0);

  p.zero_grad();
  backward(scale(sum(p.var()), 0.0));
  for (int i = 0; i < 6; ++i) CHECK(p.gradient()[i] == 0.0);
}

TEST_CASE("backward accumulates until zero_grads; rejects non-scalar loss") {
  Parameter p(Tensor({2}, {1.0, 2.0}), "p");
  backward(sum(p.var()));
  backward(sum(p.var()));
  CHECK(p.gradient()[0] == 2.0);
  p.zero_grad();
  CHECK(p.gradient()[0] == 0.0);
  CHECK_THROWS(backward(add(p.var(), p.var())));  // non-scalar loss
}

TEST_CASE("ops do not mutate their inputs") {
  Rng rng(5);
  Tensor xv = random_tensor({2, 4, 4}, rng);
  Tensor kv = random_tensor({3, 2, 3, 3}, rng);
  auto x = constant(xv);
  auto k = constant(kv);
  auto y = conv2d(x, k);
  auto s = sigmoid(y);
  auto r = relu(s);
  backward(sum(r));
  CHECK(x->value.data == xv.data);
  CHECK(k->value.data == kv.data);
}

TEST_CASE("grad_check on a linear map is exact up to rounding") {
  Rng rng(3);
  Parameter w(random_tensor({3, 4}, rng), "w");
  Parameter b(random_tensor({3}, rng), "b");
  Tensor xv = random_tensor({4}, rng);
  std::vector<Parameter> params{w, b};
  auto loss = [&] { return sum(dense(constant(xv), params[0].var(), params[1].var())); };
  auto res = grad_check(loss, params, 1e-5);
  CHECK(res.max_rel_error < 1e-10);
}

TEST_CASE("grad_check on conv2d + sigmoid") {
  Rng rng(17);
  Parameter k(random_tensor({2, 2, 3, 3}, rng, -0.5, 0.5), "kernel");
  Parameter b(random_tensor({2}, rng, -0.1, 0.1), "bias");
  Tensor xv = random_tensor({2, 5, 5}, rng);
  std::vector<Parameter> params{k, b};
  auto loss = [&] {
    return sum(sigmoid(conv2d(constant(xv), params[0].var(), params[1].var())));
  };
  auto res = grad_check(loss, params, 1e-5);
  CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("grad_check covers the composed op set") {
  Rng rng(29);
  Parameter k(random_tensor({3, 2, 3, 3}, rng, -0.4, 0.4), "k");
  Parameter w(random_tensor({2, 8}, rng, -0.4, 0.4), "w");
  Parameter b(random_tensor({2}, rng, -0.1, 0.1), "b");
  Tensor xv = random_tensor({2, 2, 2}, rng);
  std::vector<Parameter> params{k, w, b};

  // exercise concat, frozen max, reshape, pick, mul, log, rsub_const
  std::vector<int> frozen;
  {
    auto q = conv2d(constant(xv), params[0].var());
    frozen = channel_max(q).argmax;
  }
  auto loss = [&] {
    auto q = conv2d(constant(xv), params[0].var());
    auto v = channel_max_frozen(q, frozen);
    auto v3 = reshape(v, {1, 2, 2});
    auto cat = concat_channels(v3, v3);
    auto flat = reshape(cat, {8});
    auto h = sigmoid(dense(flat, params[1].var(), params[2].var()));
    auto p0 = pick(h, 0);
    auto p1 = pick(h, 1);
    auto bce = sub(scale(log(p0), -1.0), log(rsub_const(1.0, p1)));
    return add(bce, mul(p0, p1));
  };
  auto res = grad_check(loss, params, 1e-5);
  CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("sgd step: zero lr is a no-op, unit lr subtracts the gradient") {
  Parameter p(Tensor({2}, {1.0, -2.0}), "p");
  backward(sum(mul(p.var(), p.var())));  // grad = 2v
  std::vector<Parameter> params{p};

  sgd_step(params, 0.0);
  CHECK(p.value().data == std::vector<double>{1.0, -2.0});

  sgd_step(params, 1.0);
  CHECK(p.value()[0] == doctest::Approx(1.0 - 2.0));
  CHECK(p.value()[1] == doctest::Approx(-2.0 + 4.0));
}

TEST_CASE("adam converges on (w-3)^2") {
  Parameter w(Tensor({1}, {0.0}), "w");
  std::vector<Parameter> params{w};
  AdamOptimizer adam(1e-1);
  for (int i = 0; i < 500; ++i) {
    zero_grads(params);
    auto diff = add_const(params[0].var(), -3.0);
    backward(mul(diff, diff));
    adam.step(params);
  }
  CHECK(std::fabs(w.value()[0] - 3.0) < 1e-3);
}

TEST_CASE("optimizer rejects non-finite gradients") {
  Parameter p(Tensor({1}, {1.0}), "p");
  p.gradient()[0] = std::nan("");
  std::vector<Parameter> params{p};
  CHECK_THROWS(sgd_step(params, 0.1));
}

TEST_CASE("finite-value enforcement in forward ops") {
  auto x = constant(Tensor({1}, {0.0}));
  CHECK_THROWS(log(x));  // log(0) = -inf
}

TEST_CASE("evaluate_q identity: concat-then-conv equals sum of two convs") {
  Rng rng(41);
  Tensor rv = random_tensor({1, 6, 6}, rng);
  Tensor vv = random_tensor({1, 6, 6}, rng);
  Tensor wq = random_tensor({4, 1, 3, 3}, rng);
  Tensor wv = random_tensor({4, 1, 3, 3}, rng);

  auto sum_route = add(conv2d(constant(rv), constant(wq)),
                       conv2d(constant(vv), constant(wv)));

  Tensor cat_kernel({4, 2, 3, 3});
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 9; ++i) {
      cat_kernel.data[(static_cast<std::size_t>(c) * 2 + 0) * 9 + static_cast<std::size_t>(i)] =
          wq.data[static_cast<std::size_t>(c) * 9 + static_cast<std::size_t>(i)];
      cat_kernel.data[(static_cast<std::size_t>(c) * 2 + 1) * 9 + static_cast<std::size_t>(i)] =
          wv.data[static_cast<std::size_t>(c) * 9 + static_cast<std::size_t>(i)];
    }
  auto cat_route = conv2d(concat_channels(constant(rv), constant(vv)), constant(cat_kernel));

  for (int i = 0; i < sum_route->value.numel(); ++i)
    CHECK(std::fabs(sum_route->value[i] - cat_route->value[i]) < 1e-12);
}
