#include <doctest.h>

#include <cmath>

#include "greybox/optimize.h"
#include "greybox/rng.h"

using namespace greybox;

TEST_CASE("projected quasi-Newton finds an interior maximum") {
  const Objective f = [](const Vector& x, Vector* g) {
    if (g != nullptr) *g = -2.0 * (x.array() - 0.3).matrix();
    return -(x.array() - 0.3).square().sum();
  };
  const LocalSearchResult r = maximize_box_lbfgs(f, Vector::Zero(3), Vector::Ones(3), Vector::Constant(3, 0.9));
  CHECK((r.x.array() - 0.3).abs().maxCoeff() <= 1e-6);
  CHECK(r.converged);
}

TEST_CASE("active bounds are respected") {
  // Maximum of -(x - 2)^2 on [0, 1] sits on the upper bound.
  const Objective f = [](const Vector& x, Vector* g) {
    if (g != nullptr) *g = -2.0 * (x.array() - 2.0).matrix();
    return -(x.array() - 2.0).square().sum();
  };
  const LocalSearchResult r = maximize_box_lbfgs(f, Vector::Zero(2), Vector::Ones(2), Vector::Constant(2, 0.1));
  CHECK(r.x(0) == 1.0);
  CHECK(r.x(1) == 1.0);
}

TEST_CASE("the returned value never falls below the start") {
  CounterRng rng(3);
  const Objective f = [](const Vector& x, Vector* g) {
    if (g != nullptr) *g = Vector::Constant(1, 3.0 * std::cos(3.0 * x(0)) + 0.6);
    return std::sin(3.0 * x(0)) + 0.6 * x(0);
  };
  for (int i = 0; i < 20; ++i) {
    const Vector x0 = Vector::Constant(1, rng.uniform(-2.0, 2.0));
    const LocalSearchResult r = maximize_box_lbfgs(f, Vector::Constant(1, -2.0), Vector::Constant(1, 2.0), x0);
    CHECK(r.value >= f(x0, nullptr));
  }
}

TEST_CASE("multistart picks the global maximum and reports endpoints") {
  const Objective f = [](const Vector& x, Vector* g) {
    if (g != nullptr) *g = Vector::Constant(1, 3.0 * std::cos(3.0 * x(0)) + 0.6);
    return std::sin(3.0 * x(0)) + 0.6 * x(0);
  };
  OptimizerConfig oc;
  oc.restarts = 8;
  const SearchDomain dom(Vector::Constant(1, -2.0), Vector::Constant(1, 2.0));
  const OptimizeResult r = maximize_deterministic(f, dom, oc);
  // Interior critical points solve cos(3x) = -0.2; the best is near x = 0.5236 + ...
  // the global max on [-2, 2] is checked against a dense scan.
  double best = -1e300;
  for (int i = 0; i <= 400000; ++i) best = std::max(best, f(Vector::Constant(1, -2.0 + 4.0 * i / 400000), nullptr));
  CHECK(r.value >= best - 1e-9);
  CHECK(r.endpoints.size() == r.restart_values.size());
  const OptimizeResult again = maximize_deterministic(f, dom, oc);
  CHECK(again.x == r.x);
}

TEST_CASE("a flat objective is flagged") {
  const Objective f = [](const Vector& x, Vector* g) {
    if (g != nullptr) *g = Vector::Zero(x.size());
    return 0.0;
  };
  OptimizerConfig oc;
  oc.restarts = 3;
  CHECK(maximize_deterministic(f, SearchDomain::unit(2), oc).flagged);
}

TEST_CASE("stochastic gradient ascent reaches the maximum of a noisy concave objective") {
  const GradientSampler sampler = [](const Vector& x, CounterRng& rng) {
    return Vector(-2.0 * (x.array() - 0.6).matrix() + 0.1 * rng.normal_vector(x.size()));
  };
  const ValueEstimator value = [](const Vector& x) { return -(x.array() - 0.6).square().sum(); };
  OptimizerConfig oc;
  oc.restarts = 3;
  oc.step_rule = StepRule::Sga;
  oc.sga.iterations = 400;
  const OptimizeResult r = maximize_sga(sampler, value, SearchDomain::unit(2), oc);
  CHECK((r.x.array() - 0.6).abs().maxCoeff() <= 0.05);
  CHECK(r.learning_rate > 0.0);
}

TEST_CASE("one-shot dimension cap") {
  const Objective f = [](const Vector& x, Vector* g) {
    if (g != nullptr) *g = Vector::Zero(x.size());
    return 0.0;
  };
  OptimizerConfig oc;
  oc.max_one_shot_dimension = 20;
  CHECK_THROWS_AS(maximize_one_shot(f, SearchDomain::unit(2), 10, oc, {}), std::length_error);
}
