#include <doctest.h>

#include <cmath>

#include "greybox/acquisition.h"
#include "greybox/eicf.h"
#include "greybox/mogp.h"
#include "greybox/rng.h"

using namespace greybox;

namespace {

MoGpPosterior two_output_posterior() {
  Matrix factor(2, 2);
  factor << 1.0, 0.0, 0.6, 0.8;
  Vector means(2);
  means << 0.2, -0.1;
  const MultiOutputModel model =
      MultiOutputModel::coregionalized(factor, Kernel(KernelFamily::Matern52, Vector::Constant(2, 0.4), 1.0), means);
  TaggedDataset data(2, 2, 0.0);
  CounterRng rng(8);
  for (int i = 0; i < 5; ++i) {
    Vector x(2);
    x << rng.uniform(), rng.uniform();
    data.add(x, 0, std::sin(3.0 * x(0)));
    data.add(x, 1, std::cos(2.0 * x(1)));
  }
  return MoGpPosterior(model, data);
}

MoGpPosterior one_output_posterior() {
  const MultiOutputModel model = MultiOutputModel::independent(
      {Kernel(KernelFamily::SquaredExponential, Vector::Constant(1, 0.3), 1.5)}, Vector::Constant(1, 0.0));
  TaggedDataset data(1, 1, 0.0);
  for (double x : {0.1, 0.45, 0.8}) data.add(Vector::Constant(1, x), 0, std::sin(5.0 * x));
  return MoGpPosterior(model, data);
}

}  // namespace

TEST_CASE("identity outer function reduces to analytic EI") {
  const MoGpPosterior post = one_output_posterior();
  const LinearFunctionalPosterior f(post, Vector::Ones(1));
  const Incumbent inc{0.5, Vector::Constant(1, 0.45)};
  const Matrix z = CounterRng(4).normal_matrix(1, 200000);
  for (double x0 : {0.25, 0.6, 0.95}) {
    const Vector x = Vector::Constant(1, x0);
    const Estimate e = eicf_value(post, OuterFunction::identity(), inc, x, z);
    CHECK(std::abs(e.mean - ei_analytic(f, inc, x)) <= 3.0 * e.standard_error);
  }
}

TEST_CASE("negative square of a standard normal") {
  // E[(1 - Z^2)^+] = 2 phi(1) with y ~ N(0, 1) and incumbent -1.
  const MultiOutputModel model = MultiOutputModel::independent(
      {Kernel(KernelFamily::Matern52, Vector::Constant(1, 0.3), 1.0)}, Vector::Zero(1));
  const MoGpPosterior post(model, TaggedDataset(1, 1, 0.0));
  const Incumbent inc{-1.0, Vector::Zero(1)};
  const Matrix z = CounterRng(6).normal_matrix(1, 400000);
  const Estimate e = eicf_value(post, OuterFunction::negative_sum_squares(Vector::Zero(1)), inc, Vector::Zero(1), z);
  CHECK(std::abs(e.mean - 0.48394144903828673) <= 3.0 * e.standard_error);
}

TEST_CASE("zero posterior covariance gives the deterministic improvement") {
  const MoGpPosterior post = two_output_posterior();
  const Vector x = post.data().x.col(0);
  const OuterFunction g = OuterFunction::sum(2);
  const double at = g(post.mean(x));
  const Matrix z = CounterRng(1).normal_matrix(2, 64);
  const Estimate below = eicf_value(post, g, Incumbent{at - 0.25, x}, x, z);
  CHECK(below.mean == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(below.standard_error == 0.0);
  CHECK(eicf_value(post, g, Incumbent{at + 0.25, x}, x, z).mean == 0.0);
  CHECK(eicf_saa(post, g, Incumbent{at + 0.25, x}, x, z) == 0.0);
}

TEST_CASE("SAA gradient matches finite differences with fixed draws") {
  const MoGpPosterior post = two_output_posterior();
  Vector target(2);
  target << 0.3, 0.5;
  const OuterFunction g = OuterFunction::negative_sum_squares(target);
  const Incumbent inc{-0.2, Vector::Zero(2)};
  const Matrix z = CounterRng(2).normal_matrix(2, 256);
  Vector x(2);
  x << 0.37, 0.61;
  Vector grad;
  eicf_saa(post, g, inc, x, z, &grad);
  for (int i = 0; i < 2; ++i) {
    Vector p = x, m = x;
    p(i) += 1e-6;
    m(i) -= 1e-6;
    const double fd = (eicf_saa(post, g, inc, p, z) - eicf_saa(post, g, inc, m, z)) / 2e-6;
    CHECK(std::abs(grad(i) - fd) <= 1e-3 * std::abs(fd) + 1e-9);
  }
  // The SAA gradient is the average of the single-draw estimators.
  Vector avg = Vector::Zero(2);
  for (Eigen::Index m = 0; m < z.cols(); ++m) avg += eicf_gradient_sample(post, g, inc, x, z.col(m));
  avg /= static_cast<double>(z.cols());
  CHECK((avg - grad).cwiseAbs().maxCoeff() <= 1e-10);
}
