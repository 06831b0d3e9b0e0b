#include "greybox/acquisition.h"

#include <cmath>
#include <stdexcept>

#include "greybox/normal.h"
#include "greybox/rng.h"

namespace greybox {

Estimate summarize_sample(const Vector& values) {
  const Eigen::Index m = values.size();
  if (m == 0) throw std::invalid_argument("summarize_sample: empty sample");
  const double mean = values.mean();
  if (m == 1) return {mean, 0.0};
  const double var = (values.array() - mean).square().sum() / static_cast<double>(m - 1);
  return {mean, std::sqrt(var / static_cast<double>(m))};
}

std::optional<Incumbent> best_observed(const Dataset& data) {
  if (data.size() == 0) return std::nullopt;
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < data.y.size(); ++i)
    if (data.y(i) > data.y(best)) best = i;
  return Incumbent{data.y(best), data.x.col(best)};
}

Incumbent posterior_incumbent(const ScalarPosterior& post, const PointSet& points) {
  if (points.cols() == 0) throw std::invalid_argument("posterior_incumbent: no points");
  Eigen::Index best = 0;
  double value = post.mean(points.col(0));
  for (Eigen::Index i = 1; i < points.cols(); ++i) {
    const double v = post.mean(points.col(i));
    if (v > value) {
      value = v;
      best = i;
    }
  }
  return {value, points.col(best)};
}

OuterFunction OuterFunction::identity() {
  return OuterFunction(
      Tag::Identity, 1, [](const Vector& y) { return y(0); },
      [](const Vector&) { return Vector(Vector::Ones(1)); });
}

OuterFunction OuterFunction::negative_sum_squares(Vector y_obs) {
  const Vector target = y_obs;
  return OuterFunction(
      Tag::NegativeSumSquares, static_cast<int>(target.size()),
      [target](const Vector& y) { return -(y - target).squaredNorm(); },
      [target](const Vector& y) { return Vector(-2.0 * (y - target)); }, std::move(y_obs));
}

OuterFunction OuterFunction::sum(int k) {
  return OuterFunction(
      Tag::Sum, k, [](const Vector& y) { return y.sum(); },
      [k](const Vector&) { return Vector(Vector::Ones(k)); });
}

OuterFunction OuterFunction::user(int k, Fn fn, GradFn grad) {
  return OuterFunction(Tag::User, k, std::move(fn), std::move(grad));
}

CostModel CostModel::known(Fn fn) {
  CostModel c;
  c.fn_ = std::move(fn);
  return c;
}

CostModel CostModel::log_gp(std::vector<std::shared_ptr<const GpPosterior>> models, Vector fallback_log) {
  if (static_cast<Eigen::Index>(models.size()) != fallback_log.size())
    throw std::invalid_argument("log-GP cost model: one fallback per tag");
  CostModel c;
  c.models_ = std::move(models);
  c.fallback_log_ = std::move(fallback_log);
  return c;
}

double CostModel::operator()(ConstPoint x, int j) const {
  double c = 0.0;
  if (fn_) {
    c = fn_(x, j);
  } else {
    const auto& m = models_.at(static_cast<std::size_t>(j));
    c = std::exp(m ? m->mean(x) : fallback_log_(j));
  }
  if (!(c > 0.0) || !std::isfinite(c)) throw std::domain_error("cost model returned a nonpositive cost");
  return c;
}

Vector CostModel::grad(ConstPoint x, int j) const {
  if (fn_) return Vector::Zero(x.size());  // known costs are treated as locally constant
  const auto& m = models_.at(static_cast<std::size_t>(j));
  if (!m) return Vector::Zero(x.size());
  return std::exp(m->mean(x)) * m->mean_grad(x);
}

CostModel fit_log_cost_model(const PointSet& x, const std::vector<int>& tags, const Vector& cost,
                             int num_tags, std::uint64_t seed) {
  const int d = static_cast<int>(x.rows());
  std::vector<std::shared_ptr<const GpPosterior>> models(num_tags);
  Vector fallback = Vector::Zero(num_tags);
  const double global = cost.size() > 0 ? cost.array().log().mean() : 0.0;
  for (int j = 0; j < num_tags; ++j) {
    Dataset sub(d, 0.0);
    for (Eigen::Index i = 0; i < cost.size(); ++i)
      if (tags[i] == j) sub.add(x.col(i), std::log(cost(i)));
    fallback(j) = sub.size() > 0 ? sub.y.mean() : global;
    if (sub.size() < 2) continue;
    FitOptions fo;
    fo.seed = derive_seed(seed, static_cast<std::uint64_t>(j));
    fo.fit_noise = true;
    fo.restarts = 4;
    const FitResult r = fit_hyperparameters(sub, fo);
    sub.noise_variance = r.noise_variance;
    models[j] = std::make_shared<const GpPosterior>(r.kernel, r.mean, sub);
  }
  return CostModel::log_gp(std::move(models), fallback);
}

double ei_from_moments(double delta, double sigma) {
  if (!(sigma > 0.0)) return std::max(delta, 0.0);
  const double u = delta / sigma;
  return std::max(0.0, sigma * normal_excess(u));
}

double ei_analytic(const ScalarPosterior& post, const Incumbent& incumbent, ConstPoint x) {
  return ei_from_moments(post.mean(x) - incumbent.value, std::sqrt(post.variance(x)));
}

double ei_with_gradient(const ScalarPosterior& post, const Incumbent& incumbent, ConstPoint x,
                        Vector* grad) {
  const double delta = post.mean(x) - incumbent.value;
  const double var = post.variance(x);
  const double sigma = std::sqrt(var);
  if (grad != nullptr) {
    if (var > 0.0) {
      // dEI = Phi(u) dmu + phi(u) dsigma, dsigma = dvar / (2 sigma)
      const double u = delta / sigma;
      *grad = normal_cdf(u) * post.mean_grad(x) + normal_pdf(u) * post.variance_grad(x) / (2.0 * sigma);
    } else {
      grad->setZero(x.size());
    }
  }
  return ei_from_moments(delta, sigma);
}

Vector ei_gradient(const ScalarPosterior& post, const Incumbent& incumbent, ConstPoint x) {
  if (!(post.variance(x) > 0.0))
    throw std::domain_error("ei_gradient: posterior variance is zero; EI is not differentiable here");
  Vector g;
  ei_with_gradient(post, incumbent, x, &g);
  return g;
}

}  // namespace greybox
