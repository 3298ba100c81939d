#include <doctest.h>

#include <cmath>

#include "dsc/optim.hpp"
#include "dsc/rng.hpp"

using namespace dsc;

namespace {

// One scalar trainable parameter with a preset gradient.
template <typename T>
ParameterStore<T> scalar_param(T value) {
  ParameterStore<T> store;
  Tensor<T> p = Tensor<T>::scalar(value);
  store.add("p", p, true);
  return store;
}

template <typename T>
void set_grad(ParameterStore<T>& store, T g) {
  auto& p = store.find("p");
  p.zero_grad();
  p.grad()[0] = g;
}

}  // namespace

TEST_CASE("scce loss matches hand values") {
  Tensor<double> uniform = Tensor<double>::full(Shape{3, 5}, 0.2);
  const std::vector<int> labels = {0, 2, 4};
  Tensor<double> loss = scce_loss<double>(uniform, labels, nullptr);
  CHECK(loss.item() == doctest::Approx(std::log(5.0)).epsilon(1e-9));

  Tensor<double> onehot(Shape{2, 3});
  onehot.at(0, 1) = 1.0;
  onehot.at(1, 0) = 1.0;
  const std::vector<int> exact = {1, 0};
  CHECK(scce_loss<double>(onehot, exact, nullptr).item() <= 1e-6);

  Tensor<double> half = Tensor<double>::from_data(Shape{1, 2}, {0.5, 0.5});
  const std::vector<int> one = {0};
  CHECK(scce_loss<double>(half, one, nullptr).item() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));

  const std::vector<int> bad = {7};
  CHECK_THROWS_AS(scce_loss<double>(half, bad, nullptr), DataError);
}

TEST_CASE("sgd without momentum reproduces the plain update rule") {
  auto store = scalar_param<double>(1.0);
  SgdOptimizer<double> opt{SgdConfig{0.01, 0.0}};
  set_grad(store, 0.5);
  opt.step(store);
  CHECK(store.find("p").values()[0] == doctest::Approx(0.995).epsilon(1e-12));

  // randomized agreement with psi - lr*g to machine precision
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const double psi = rng.uniform(-5.0, 5.0);
    const double g = rng.uniform(-3.0, 3.0);
    const double lr = rng.uniform(1e-4, 0.5);
    auto s = scalar_param<double>(psi);
    SgdOptimizer<double> o{SgdConfig{lr, 0.0}};
    set_grad(s, g);
    o.step(s);
    CHECK(s.find("p").values()[0] == doctest::Approx(psi - lr * g).epsilon(1e-15));
  }
}

TEST_CASE("sgd momentum recursion matches the hand-computed pair of steps") {
  auto store = scalar_param<double>(1.0);
  SgdOptimizer<double> opt{SgdConfig{0.01, 0.9}};
  set_grad(store, 1.0);
  opt.step(store);  // v=1, psi=0.99
  CHECK(store.find("p").values()[0] == doctest::Approx(0.99).epsilon(1e-12));
  set_grad(store, 1.0);
  opt.step(store);  // v=1.9, psi=0.99-0.019
  CHECK(store.find("p").values()[0] == doctest::Approx(0.971).epsilon(1e-12));
}

TEST_CASE("sgd zero gradient decays velocity and leaves the value alone") {
  auto store = scalar_param<double>(2.0);
  SgdOptimizer<double> opt{SgdConfig{0.1, 0.9}};
  set_grad(store, 0.0);
  opt.step(store);
  CHECK(store.find("p").values()[0] == 2.0);  // v was 0, stays 0
  CHECK(opt.state_slots()[0]->at(0) == 0.0);
}

TEST_CASE("adam first step matches the hand-evaluated moments") {
  auto store = scalar_param<double>(1.0);
  AdamOptimizer<double> opt{AdamConfig{}};
  set_grad(store, 2.0);
  opt.step(store);
  // m=0.2, v=0.004, m_hat=2, v_hat=4, step = lr*2/(2+eps)
  const double expected = 1.0 - 0.001 * 2.0 / (2.0 + 1e-8);
  CHECK(store.find("p").values()[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(opt.state_slots()[0]->at(0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(opt.state_slots()[1]->at(0) == doctest::Approx(0.004).epsilon(1e-12));
  CHECK(opt.steps_taken() == 1);
}

TEST_CASE("adam with zero gradient and zero moments is a no-op") {
  auto store = scalar_param<double>(1.5);
  AdamOptimizer<double> opt{AdamConfig{}};
  set_grad(store, 0.0);
  opt.step(store);
  CHECK(store.find("p").values()[0] == 1.5);
}

TEST_CASE("adam first-step magnitude is the learning rate, any gradient scale") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    double g = rng.uniform(0.01, 100.0);
    if (rng.uniform() < 0.5) g = -g;
    auto store = scalar_param<double>(0.0);
    AdamOptimizer<double> opt{AdamConfig{}};
    set_grad(store, g);
    opt.step(store);
    const double delta = std::abs(store.find("p").values()[0]);
    CHECK(std::abs(delta - 0.001) / 0.001 <= 1e-6);
  }
}

TEST_CASE("adam t=1 update is invariant to positive gradient rescaling") {
  Rng rng(3);
  const AdamConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    double g = rng.uniform(0.5, 3.0);
    if (rng.uniform() < 0.5) g = -g;
    const double c = rng.uniform(1.0, 1000.0);

    auto base = scalar_param<double>(1.0);
    AdamOptimizer<double> opt1{cfg};
    set_grad(base, g);
    opt1.step(base);

    auto scaled = scalar_param<double>(1.0);
    AdamOptimizer<double> opt2{cfg};
    set_grad(scaled, c * g);
    opt2.step(scaled);

    const double diff = std::abs(base.find("p").values()[0] -
                                 scaled.find("p").values()[0]);
    CHECK(diff <= cfg.learning_rate * cfg.epsilon * 2.0);
  }
}

TEST_CASE("both optimizers descend the quadratic from psi0 = 1") {
  // J(psi) = psi^2/2, gradient = psi
  auto run = [](Optimizer<double>& opt, ParameterStore<double>& store) {
    std::vector<double> trajectory;
    for (int step = 0; step < 100; ++step) {
      auto& p = store.find("p");
      p.zero_grad();
      p.grad()[0] = p.values()[0];
      opt.step(store);
      trajectory.push_back(std::abs(p.values()[0]));
    }
    return trajectory;
  };

  // Adam defaults: |psi| decreases at every step
  auto adam_store = scalar_param<double>(1.0);
  AdamOptimizer<double> adam{AdamConfig{}};
  auto adam_traj = run(adam, adam_store);
  double prev = 1.0;
  for (double v : adam_traj) {
    CHECK(v < prev);
    prev = v;
  }

  // Momentum-free SGD: |psi| decreases at every step
  auto sgd_store = scalar_param<double>(1.0);
  SgdOptimizer<double> plain{SgdConfig{0.01, 0.0}};
  auto sgd_traj = run(plain, sgd_store);
  prev = 1.0;
  for (double v : sgd_traj) {
    CHECK(v < prev);
    prev = v;
  }

  // Momentum 0.9 overshoots through zero, so per-step monotonicity cannot
  // hold; the run still contracts overall.
  auto mom_store = scalar_param<double>(1.0);
  SgdOptimizer<double> momentum{SgdConfig{0.01, 0.9}};
  auto mom_traj = run(momentum, mom_store);
  CHECK(mom_traj.back() < 0.05);
}

TEST_CASE("frozen parameters are never touched") {
  ParameterStore<double> store;
  store.add("trainable", Tensor<double>::scalar(1.0), true);
  store.add("frozen", Tensor<double>::scalar(2.0), false);
  store.find("trainable").grad()[0] = 1.0;

  SgdOptimizer<double> sgd{SgdConfig{0.1, 0.0}};
  sgd.step(store);
  CHECK(store.find("frozen").values()[0] == 2.0);
  CHECK(store.find("trainable").values()[0] == doctest::Approx(0.9));

  AdamOptimizer<double> adam{AdamConfig{}};
  store.find("trainable").zero_grad();
  store.find("trainable").grad()[0] = 1.0;
  adam.step(store);
  CHECK(store.find("frozen").values()[0] == 2.0);
}

TEST_CASE("non-finite gradients abort with the parameter name") {
  auto store = scalar_param<double>(1.0);
  store.find("p").grad()[0] = std::numeric_limits<double>::quiet_NaN();
  SgdOptimizer<double> opt{SgdConfig{0.01, 0.0}};
  CHECK_THROWS_WITH_AS(opt.step(store),
                       "non-finite gradient for parameter p", NumericError);
}

TEST_CASE("schedule expansion covers the hybrid runs") {
  Schedule adam_then_sgd = {{AdamConfig{}, 3}, {SgdConfig{}, 2}};
  auto plan = expand_schedule(adam_then_sgd);
  CHECK(plan == std::vector<int>{0, 0, 0, 1, 1});
  CHECK(schedule_total_epochs(adam_then_sgd) == 5);
  CHECK(optimizer_label(adam_then_sgd[0].optimizer) == "adam");
  CHECK(optimizer_label(adam_then_sgd[1].optimizer) == "sgd");

  Schedule sgd_then_adam = {{SgdConfig{}, 3}, {AdamConfig{}, 2}};
  CHECK(expand_schedule(sgd_then_adam) == std::vector<int>{0, 0, 0, 1, 1});

  Schedule single = {{AdamConfig{}, 5}};
  CHECK(expand_schedule(single) == std::vector<int>{0, 0, 0, 0, 0});

  CHECK_THROWS_AS(expand_schedule(Schedule{}), ConfigError);
  Schedule zero = {{AdamConfig{}, 0}};
  CHECK_THROWS_AS(expand_schedule(zero), ConfigError);
}

TEST_CASE("optimizer config validation") {
  const SgdConfig negative_lr{-0.1, 0.0};
  const SgdConfig momentum_one{0.1, 1.0};
  const AdamConfig beta_one{0.001, 1.0, 0.999, 1e-8};
  const AdamConfig zero_eps{0.001, 0.9, 0.999, 0.0};
  CHECK_THROWS_AS(SgdOptimizer<double>{negative_lr}, ConfigError);
  CHECK_THROWS_AS(SgdOptimizer<double>{momentum_one}, ConfigError);
  CHECK_THROWS_AS(AdamOptimizer<double>{beta_one}, ConfigError);
  CHECK_THROWS_AS(AdamOptimizer<double>{zero_eps}, ConfigError);
}
