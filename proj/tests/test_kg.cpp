#include <doctest.h>

#include <cmath>

#include "greybox/kg.h"
#include "greybox/mogp.h"
#include "greybox/rng.h"
#include "oracles.h"

using namespace greybox;

namespace {

GpPosterior toy(double shift = 0.0, double noise = 1e-4) {
  PointSet x(1, 5);
  x << 0.05, 0.3, 0.5, 0.72, 0.95;
  Vector y(5);
  y << 0.1, 0.7, 0.2, 0.65, -0.4;
  return GpPosterior(Kernel(KernelFamily::Matern52, Vector::Constant(1, 0.2), 0.8), MeanFunction::constant(0.05 + shift),
                     Dataset(x, (y.array() + shift).matrix(), noise));
}

PointSet grid(int n) {
  PointSet p(1, n);
  for (int i = 0; i < n; ++i) p(0, i) = (i + 0.5) / n;
  return p;
}

// Brute force: fantasize y at x, refit the posterior exactly, take the max of
// the updated mean over points and x.
Estimate nested_mc_kg(const GpPosterior& gp, ConstPoint x, const PointSet& points, int draws, std::uint64_t seed) {
  PointSet all(points.rows(), points.cols() + 1);
  all << points, x;
  double base = -1e300;
  for (Eigen::Index i = 0; i < all.cols(); ++i) base = std::max(base, gp.mean(all.col(i)));
  CounterRng rng(seed);
  const double sd = std::sqrt(gp.variance(x) + gp.noise_variance());
  Vector samples(draws);
  for (int s = 0; s < draws; ++s) {
    Dataset d = gp.data();
    d.add(x, gp.mean(x) + sd * rng.normal());
    const GpPosterior next(gp.kernel(), gp.mean_function(), d);
    double best = -1e300;
    for (Eigen::Index i = 0; i < all.cols(); ++i) best = std::max(best, next.mean(all.col(i)));
    samples(s) = best - base;
  }
  return summarize_sample(samples);
}

}  // namespace

TEST_CASE("envelope excess of two symmetric lines is E|Z|") {
  Vector a = Vector::Zero(2), b(2);
  b << -1.0, 1.0;
  CHECK(envelope_excess(a, b) == doctest::Approx(0.7978845608028654).epsilon(1e-14));
  Vector flat = Vector::Zero(3);
  CHECK(envelope_excess(Vector::LinSpaced(3, 0.0, 1.0), flat) == 0.0);
}

TEST_CASE("envelope excess gradients match central differences") {
  Vector a(4), b(4);
  a << 0.1, 0.3, -0.2, 0.25;
  b << -0.5, 0.2, 1.1, 0.7;
  Vector da, db;
  envelope_excess(a, b, &da, &db);
  for (int i = 0; i < 4; ++i) {
    Vector ap = a, am = a, bp = b, bm = b;
    ap(i) += 1e-7;
    am(i) -= 1e-7;
    bp(i) += 1e-7;
    bm(i) -= 1e-7;
    CHECK(da(i) == doctest::Approx((envelope_excess(ap, b) - envelope_excess(am, b)) / 2e-7).epsilon(1e-5).scale(1e-6));
    CHECK(db(i) == doctest::Approx((envelope_excess(a, bp) - envelope_excess(a, bm)) / 2e-7).epsilon(1e-5).scale(1e-6));
  }
}

TEST_CASE("discretized KG agrees with Monte Carlo on the same lines") {
  const GpPosterior gp = toy();
  const GpKgView view(gp);
  const PointSet pts = grid(30);
  for (double x0 : {0.15, 0.4, 0.85}) {
    const Vector x = Vector::Constant(1, x0);
    const double exact = kg_discretized(gp, x, pts);
    const auto plan = make_kg_plan(KgSamplePlan::Strategy::Discretized, 200000, pts, 4);
    const Estimate mc = kg_value(view, x, plan, SearchDomain::unit(1));
    CHECK(std::abs(mc.mean - exact) <= 3.0 * mc.standard_error);
    CHECK(exact >= 0.0);
  }
}

TEST_CASE("discretized KG agrees with refitting under fantasized data") {
  const GpPosterior gp = toy();
  const PointSet pts = grid(12);
  for (double x0 : {0.2, 0.62}) {
    const Vector x = Vector::Constant(1, x0);
    const Estimate mc = nested_mc_kg(gp, x, pts, 20000, 9);
    CHECK(std::abs(mc.mean - kg_discretized(gp, x, pts)) <= 3.0 * mc.standard_error);
  }
}

TEST_CASE("KG is invariant to a common shift of data and prior mean") {
  const GpPosterior a = toy(0.0), b = toy(4.0);
  const PointSet pts = grid(25);
  const auto plan = make_kg_plan(KgSamplePlan::Strategy::Discretized, 500, pts, 2);
  for (double x0 : {0.1, 0.45, 0.8}) {
    const Vector x = Vector::Constant(1, x0);
    CHECK(std::abs(kg_discretized(a, x, pts) - kg_discretized(b, x, pts)) <= 1e-12);
    CHECK(std::abs(kg_value(GpKgView(a), x, plan, SearchDomain::unit(1)).mean -
                   kg_value(GpKgView(b), x, plan, SearchDomain::unit(1)).mean) <= 1e-12);
  }
}

TEST_CASE("discretized KG gradient matches central differences") {
  const GpPosterior gp = toy();
  const GpKgView view(gp);
  const DiscretizedKg dk(view, grid(40));
  for (double x0 : {0.13, 0.41, 0.66, 0.88}) {
    Vector g;
    dk.value(Vector::Constant(1, x0), &g);
    const double fd = (dk.value(Vector::Constant(1, x0 + 1e-6)) - dk.value(Vector::Constant(1, x0 - 1e-6))) / 2e-6;
    CHECK(g(0) == doctest::Approx(fd).epsilon(1e-4).scale(1e-6));
  }
}

TEST_CASE("one-shot KG gradient and dimension cap") {
  const GpPosterior gp = toy();
  const GpKgView view(gp);
  CounterRng rng(3);
  const Vector z = rng.normal_vector(4);
  Vector joint(5);
  joint << 0.4, 0.2, 0.33, 0.7, 0.9;
  Vector g;
  one_shot_kg(view, joint, z, 0.5, &g);
  for (int i = 0; i < 5; ++i) {
    Vector p = joint, m = joint;
    p(i) += 1e-6;
    m(i) -= 1e-6;
    const double fd = (one_shot_kg(view, p, z, 0.5, nullptr) - one_shot_kg(view, m, z, 0.5, nullptr)) / 2e-6;
    CHECK(g(i) == doctest::Approx(fd).epsilon(1e-4).scale(1e-6));
  }
  OptimizerConfig oc;
  oc.max_one_shot_dimension = 10;
  CHECK_THROWS_AS(maximize_kg_one_shot(view, SearchDomain::unit(1), rng.normal_vector(20), oc), std::length_error);
}

TEST_CASE("one-shot KG matches the Monte Carlo estimate at its optimum") {
  const GpPosterior gp = toy();
  const GpKgView view(gp);
  const auto plan = make_kg_plan(KgSamplePlan::Strategy::OneShot, 64, grid(10), 5);
  OptimizerConfig oc;
  oc.restarts = 4;
  const OptimizeResult r = maximize_kg_one_shot(view, SearchDomain::unit(1), plan.z, oc, 4);
  // Each fantasy block is a feasible inner point, so the SAA value cannot beat
  // the inner-maximized estimate with the same draws.
  const Estimate mc = kg_value(view, r.x, plan, SearchDomain::unit(1));
  CHECK(r.value <= mc.mean + 1e-8);
  CHECK(r.value >= -1e-12);
}

TEST_CASE("multi-output view with an independent model reduces to the scalar view") {
  const GpPosterior gp = toy(0.0, 0.01);
  const Kernel other(KernelFamily::Matern52, Vector::Constant(1, 0.5), 2.0);
  Vector means(2);
  means << 0.05, 0.0;
  const MultiOutputModel model = MultiOutputModel::independent({gp.kernel(), other}, means);
  TaggedDataset data(1, 2, 0.01);
  for (Eigen::Index i = 0; i < gp.data().x.cols(); ++i) data.add(gp.data().x.col(i), 0, gp.data().y(i));
  data.add(Vector::Constant(1, 0.5), 1, 3.0);
  const MoGpPosterior post(model, data);
  Vector p(2);
  p << 1.0, 0.0;
  const MoKgView view(post, p, 0);
  const PointSet pts = grid(20);
  // The joint Gram is jittered relative to its mean diagonal, so agreement is
  // only to jitter order.
  for (double x0 : {0.2, 0.7}) {
    const Vector x = Vector::Constant(1, x0);
    CHECK(kg_discretized(view, x, pts) == doctest::Approx(kg_discretized(gp, x, pts)).epsilon(1e-6));
  }
  // Fantasizing the unrelated output teaches nothing about output 0.
  CHECK(std::abs(kg_discretized(MoKgView(post, p, 1), Vector::Constant(1, 0.2), pts)) <= 1e-12);
}

TEST_CASE("rebinding shares the point set") {
  const GpPosterior gp = toy();
  const GpKgView view(gp);
  const DiscretizedKg a(view, grid(15));
  const DiscretizedKg b = a.rebind(view);
  CHECK(a.value(Vector::Constant(1, 0.3)) == b.value(Vector::Constant(1, 0.3)));
}
