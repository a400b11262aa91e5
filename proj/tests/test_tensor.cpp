#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tbsa/gradcheck.hpp"
#include "tbsa/tensor.hpp"

using namespace tbsa;

namespace {

TensorPtr randn(std::vector<size_t> shape, Rng& rng, const char* name) {
  auto t = rand_uniform(std::move(shape), -1.0, 1.0, rng);
  t->name = name;
  return t;
}

// Finite-difference property for one primitive: loss = sum(op(inputs)).
double fd_check(const std::function<TensorPtr(Tape&, const std::vector<TensorPtr>&)>& op,
                const std::vector<TensorPtr>& inputs) {
  auto res = grad_check(
      [&](bool back) {
        Tape tape;
        TensorPtr loss = sum_all(tape, op(tape, inputs));
        if (back) tape.backward(loss);
        return loss->val[0];
      },
      inputs, 1e-5);
  return res.max_rel_error;
}

}  // namespace

TEST_CASE("analytic values of activations") {
  Tape tape;
  auto x = make_vector({0.0, 2.0, -2.0});
  auto s = sigmoid(tape, x);
  CHECK(s->val[0] == 0.5);
  CHECK(s->val[1] == Catch::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
  for (double v : s->val) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  auto t = tanh_op(tape, x);
  CHECK(t->val[0] == 0.0);
  for (double v : t->val) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("softmax of equal logits is uniform and rows sum to one") {
  Tape tape;
  auto x = make_matrix(2, 3, {0.7, 0.7, 0.7, -1.0, 2.0, 0.5});
  auto p = row_softmax(tape, x);
  for (int j = 0; j < 3; ++j) CHECK(p->at(0, j) == Catch::Approx(1.0 / 3).epsilon(1e-12));
  for (size_t i = 0; i < 2; ++i) {
    double sum = p->at(i, 0) + p->at(i, 1) + p->at(i, 2);
    CHECK(std::abs(sum - 1.0) < 1e-9);
    for (size_t j = 0; j < 3; ++j) CHECK(p->at(i, j) > 0.0);
  }
}

TEST_CASE("matmul by identity is identity") {
  Tape tape;
  auto eye = make_matrix(2, 2, {1, 0, 0, 1});
  auto a = make_matrix(2, 3, {1, 2, 3, 4, 5, 6});
  auto out = matmul(tape, eye, a);
  CHECK(out->val == a->val);
}

TEST_CASE("backward of linear and quadratic forms") {
  auto p = make_vector({1.5, -2.0, 0.25});
  p->name = "p";
  {
    Tape tape;
    auto loss = sum_all(tape, p);
    tape.backward(loss);
    for (double g : p->grad) CHECK(g == 1.0);
    p->zero_grad();
  }
  {
    Tape tape;
    auto loss = inner(tape, p, p);
    tape.backward(loss);
    for (size_t i = 0; i < 3; ++i) CHECK(p->grad[i] == Catch::Approx(2.0 * p->val[i]));
  }
}

TEST_CASE("every primitive matches central differences") {
  Rng rng(7);
  auto a = randn({3, 4}, rng, "a");
  auto b = randn({4, 5}, rng, "b");
  auto c = randn({3, 4}, rng, "c");
  auto v = randn({4}, rng, "v");
  auto w = randn({5, 4}, rng, "w");

  CHECK(fd_check([&](Tape& t, const auto&) { return matmul(t, a, b); }, {a, b}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return matmul_nt(t, a, w); }, {a, w}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return add(t, a, c); }, {a, c}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return sub(t, a, c); }, {a, c}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return mul(t, a, c); }, {a, c}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return add_rowvec(t, a, v); }, {a, v}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return scale(t, a, -1.7); }, {a}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return affine(t, a, 1.0, -1.0); }, {a}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return sigmoid(t, a); }, {a}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return tanh_op(t, a); }, {a}) < 1e-6);
  // plain sum over a softmax row is constant; weight the entries to get a
  // nontrivial gradient
  auto smw = randn({3, 4}, rng, "smw_const");
  CHECK(fd_check([&](Tape& t, const auto&) { return mul(t, row_softmax(t, a), smw); }, {a}) <
        1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return concat(t, v, v); }, {v}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return vcat(t, a, c); }, {a, c}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return mean_all(t, a); }, {a}) < 1e-6);
  CHECK(fd_check([&](Tape& t, const auto&) { return take_rows(t, a, {2, 0, 2}); }, {a}) < 1e-6);

  // softmax composed with pick_nll exercises the log path with a well-scaled loss
  std::vector<int> idx{1, 0, 3};
  std::vector<char> mask{1, 0, 1};
  CHECK(fd_check([&](Tape& t, const auto&) { return pick_nll(t, row_softmax(t, a), idx, mask); },
                 {a}) < 1e-6);

  std::vector<std::vector<int>> nb{{1, 2}, {}, {0}};
  CHECK(fd_check([&](Tape& t, const auto&) { return adj_mean(t, a, nb); }, {a}) < 1e-6);

  double ip = 0;
  {
    Tape t;
    ip = fd_check([&](Tape& tt, const auto&) { return inner(tt, v, v); }, {v});
  }
  CHECK(ip < 1e-6);
}

TEST_CASE("adj_mean semantics") {
  Tape tape;
  auto h = make_matrix(3, 2, {1, 2, 3, 4, 5, 6});
  std::vector<std::vector<int>> nb{{1, 2}, {}, {0}};
  auto out = adj_mean(tape, h, nb);
  CHECK(out->at(0, 0) == 4.0);  // mean of rows 1 and 2
  CHECK(out->at(0, 1) == 5.0);
  CHECK(out->at(1, 0) == 0.0);  // isolated
  CHECK(out->at(2, 0) == 1.0);
}

TEST_CASE("shape mismatches raise errors naming the operation") {
  Tape tape;
  auto a = make_matrix(2, 3, {1, 2, 3, 4, 5, 6});
  auto b = make_matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK_THROWS_WITH(matmul(tape, a, b), Catch::Matchers::ContainsSubstring("matmul"));
  auto v = make_vector({1, 2});
  CHECK_THROWS_WITH(add_rowvec(tape, a, v), Catch::Matchers::ContainsSubstring("add_rowvec"));
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  auto a = make_vector({1, 2});
  CHECK_THROWS_AS(tape.backward(a), NumericError);
}

TEST_CASE("dropout contracts") {
  auto x = make_vector({1.0, -2.0, 3.0, -4.0});
  Tape tape;
  Rng rng(3);

  SECTION("rate zero and eval mode are the identity") {
    CHECK(dropout(tape, x, 0.0, true, rng) == x);
    CHECK(dropout(tape, x, 0.5, false, rng) == x);
  }

  SECTION("invalid rate") {
    CHECK_THROWS_AS(dropout(tape, x, 1.0, true, rng), ValidationError);
    CHECK_THROWS_AS(dropout(tape, x, -0.1, true, rng), ValidationError);
  }

  SECTION("deterministic under a fixed seed") {
    Rng r1(99), r2(99);
    Tape t1, t2;
    auto d1 = dropout(t1, x, 0.5, true, r1);
    auto d2 = dropout(t2, x, 0.5, true, r2);
    CHECK(d1->val == d2->val);
  }

  SECTION("inverted dropout preserves expectation within 3 standard errors") {
    const int trials = 4000;
    const double rate = 0.5;
    double sum = 0.0;
    Rng r(5);
    for (int i = 0; i < trials; ++i) {
      Tape t;
      auto d = dropout(t, x, rate, true, r);
      sum += d->val[0];
    }
    double mean = sum / trials;
    // each sample is 0 or 2 with p=1/2: std = 1, se = 1/sqrt(trials)
    double se = 1.0 / std::sqrt(static_cast<double>(trials));
    CHECK(std::abs(mean - x->val[0]) < 3.0 * se);
  }

  SECTION("gradient flows through the kept mask") {
    Rng r(11);
    Tape t;
    x->zero_grad();
    auto d = dropout(t, x, 0.5, true, r);
    auto loss = sum_all(t, d);
    t.backward(loss);
    for (size_t i = 0; i < x->size(); ++i) {
      double expected = d->val[i] == 0.0 ? 0.0 : 2.0;
      CHECK(x->grad[i] == expected);
    }
  }
}

TEST_CASE("grad_check rejects nonpositive eps") {
  auto p = make_vector({1.0});
  p->name = "p";
  CHECK_THROWS_AS(grad_check([&](bool) { return 0.0; }, {p}, 0.0), ValidationError);
}

TEST_CASE("grad_check on a closed-form quadratic is exact to 1e-9") {
  Rng rng(21);
  auto p = rand_uniform({6}, -1, 1, rng);
  p->name = "p";
  auto res = grad_check(
      [&](bool back) {
        Tape tape;
        auto loss = inner(tape, p, p);
        if (back) tape.backward(loss);
        return loss->val[0];
      },
      {p}, 1e-5);
  CHECK(res.max_rel_error < 1e-9);
}
