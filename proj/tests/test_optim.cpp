#include <catch2/catch_amalgamated.hpp>

#include "tbsa/optim.hpp"

using namespace tbsa;

TEST_CASE("adam leaves parameters alone under zero gradient") {
  auto p = make_vector({1.0, -2.0, 0.5});
  p->name = "p";
  p->ensure_grad();
  AdamState adam(1e-4);
  auto before = p->val;
  adam.step({p});
  CHECK(p->val == before);
  CHECK(adam.step_count() == 1);
}

TEST_CASE("adam moves opposite to a constant gradient sign") {
  auto p = make_vector({0.0, 0.0});
  p->name = "p";
  p->ensure_grad();
  AdamState adam(1e-3);
  for (int i = 0; i < 100; ++i) {
    p->grad = {0.5, -2.0};
    adam.step({p});
  }
  CHECK(p->val[0] < 0.0);
  CHECK(p->val[1] > 0.0);
  // grads are zeroed after each step
  for (double g : p->grad) CHECK(g == 0.0);
}

TEST_CASE("adam default learning rate and missing-grad error") {
  AdamState adam;
  CHECK(adam.learning_rate() == 0.0001);
  auto p = make_vector({1.0});
  p->name = "p";
  CHECK_THROWS_AS(adam.step({p}), NumericError);
}

TEST_CASE("clip_global_norm halves gradients with norm 2 at cap 1") {
  auto a = make_vector({0.0, 0.0});
  auto b = make_vector({0.0, 0.0, 0.0});
  a->ensure_grad();
  b->ensure_grad();
  a->grad = {1.2, 0.0};
  b->grad = {0.0, 1.6, 0.0};  // global norm = 2.0
  double norm = clip_global_norm({a, b}, 1.0);
  CHECK(norm == Catch::Approx(2.0).epsilon(1e-12));
  CHECK(a->grad[0] == Catch::Approx(0.6).epsilon(1e-12));
  CHECK(b->grad[1] == Catch::Approx(0.8).epsilon(1e-12));
  CHECK(global_grad_norm({a, b}) <= 1.0 + 1e-9);
}

TEST_CASE("clip_global_norm is a no-op below the cap and never grows a gradient") {
  auto a = make_vector({0.0, 0.0});
  a->ensure_grad();
  a->grad = {0.3, -0.4};  // norm 0.5
  clip_global_norm({a}, 1.0);
  CHECK(a->grad[0] == 0.3);
  CHECK(a->grad[1] == -0.4);

  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = make_vector({0.0, 0.0, 0.0, 0.0});
    p->ensure_grad();
    for (double& g : p->grad) g = rng.uniform(-3, 3);
    auto before = p->grad;
    clip_global_norm({p}, rng.uniform(0.1, 2.0));
    for (size_t i = 0; i < before.size(); ++i)
      CHECK(std::abs(p->grad[i]) <= std::abs(before[i]) + 1e-15);
  }
}

TEST_CASE("clip_global_norm rejects nonpositive caps") {
  auto p = make_vector({1.0});
  p->ensure_grad();
  CHECK_THROWS_AS(clip_global_norm({p}, 0.0), ValidationError);
}
