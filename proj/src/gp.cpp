#include "greybox/gp.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "greybox/batch.h"
#include "greybox/optimize.h"
#include "greybox/rng.h"

namespace greybox {

Dataset::Dataset(int dim, double noise) : x(dim, 0), y(0), noise_variance(noise) {}

Dataset::Dataset(PointSet x_, Vector y_, double noise)
    : x(std::move(x_)), y(std::move(y_)), noise_variance(noise) {
  if (x.cols() != y.size()) throw std::invalid_argument("Dataset: x/y size mismatch");
  if (noise_variance < 0.0) throw std::invalid_argument("Dataset: noise variance must be >= 0");
}

void Dataset::add(ConstPoint point, double value) {
  if (x.rows() == 0 && x.cols() == 0) x.resize(point.size(), 0);
  if (point.size() != x.rows()) throw std::invalid_argument("Dataset::add: dimension mismatch");
  x.conservativeResize(Eigen::NoChange, x.cols() + 1);
  x.col(x.cols() - 1) = point;
  y.conservativeResize(y.size() + 1);
  y(y.size() - 1) = value;
}

GpPosterior::GpPosterior(Kernel kernel, MeanFunction mean, Dataset data, const JitterPolicy& jitter)
    : kernel_(std::move(kernel)), mean_(mean), data_(std::move(data)) {
  if (data_.size() > 0 && data_.dim() != kernel_.dim())
    throw std::invalid_argument("GpPosterior: data dimension does not match kernel");
  const int n = data_.size();
  if (n > 0) {
    Matrix gram = parallel::gram(kernel_, data_.x);
    gram.diagonal().array() += data_.noise_variance;
    chol_ = jittered_cholesky(gram, kernel_.output_scale(), jitter);
    lower_ = chol_.llt.matrixL();
    Vector residual(n);
    for (int i = 0; i < n; ++i) residual(i) = data_.y(i) - mean_(data_.x.col(i));
    alpha_ = chol_.llt.solve(residual);
  } else {
    lower_.resize(0, 0);
    alpha_.resize(0);
  }
  floor_ = 1e-10 * kernel_.output_scale() + (data_.noise_variance == 0.0 ? chol_.jitter : 0.0);
}

Vector GpPosterior::prior_row(ConstPoint x) const {
  const int n = data_.size();
  Vector row(n);
  for (int i = 0; i < n; ++i) row(i) = kernel_(data_.x.col(i), x);
  return row;
}

Matrix GpPosterior::prior_row_jacobian(ConstPoint x) const {
  const int n = data_.size();
  Matrix jac(n, dim());
  for (int i = 0; i < n; ++i) jac.row(i) = kernel_.grad_first(x, data_.x.col(i)).transpose();
  return jac;
}

Vector GpPosterior::solve(const Vector& v) const {
  if (v.size() == 0) return v;
  return chol_.llt.solve(v);
}

double GpPosterior::mean(ConstPoint x) const {
  if (data_.size() == 0) return mean_(x);
  return mean_(x) + prior_row(x).dot(alpha_);
}

Vector GpPosterior::mean_grad(ConstPoint x) const {
  if (data_.size() == 0) return Vector::Zero(dim());
  return prior_row_jacobian(x).transpose() * alpha_;
}

double GpPosterior::raw_variance(ConstPoint x, Vector* row) const {
  const double prior = kernel_(x, x);
  if (data_.size() == 0) return prior;
  Vector k = prior_row(x);
  const Vector v = lower_.triangularView<Eigen::Lower>().solve(k);
  if (row != nullptr) *row = std::move(k);
  return prior - v.squaredNorm();
}

double GpPosterior::variance(ConstPoint x) const {
  const double v = raw_variance(x, nullptr);
  return v <= floor_ ? 0.0 : v;
}

Vector GpPosterior::variance_grad(ConstPoint x) const {
  if (data_.size() == 0) return Vector::Zero(dim());
  return -2.0 * (prior_row_jacobian(x).transpose() * solve(prior_row(x)));
}

double GpPosterior::cov(ConstPoint x, ConstPoint x2) const {
  if (x == x2) return variance(x);
  const double prior = kernel_(x, x2);
  if (data_.size() == 0) return prior;
  const auto lower = lower_.triangularView<Eigen::Lower>();
  const Vector v1 = lower.solve(prior_row(x));
  const Vector v2 = lower.solve(prior_row(x2));
  return prior - v1.dot(v2);
}

Vector GpPosterior::cov_grad_first(ConstPoint x, ConstPoint x2) const {
  Vector g = kernel_.grad_first(x, x2);
  if (data_.size() == 0) return g;
  return g - prior_row_jacobian(x).transpose() * solve(prior_row(x2));
}

Matrix GpPosterior::cov_matrix(const PointSet& points) const {
  Matrix prior = parallel::gram(kernel_, points);
  if (data_.size() == 0) return prior;
  const Matrix cross = parallel::cross_gram(kernel_, data_.x, points);
  const Matrix v = lower_.triangularView<Eigen::Lower>().solve(cross);
  return prior - v.transpose() * v;
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

}  // namespace

double log_marginal_likelihood(const Kernel& kernel, const MeanFunction& mean, const Dataset& data,
                               const JitterPolicy& jitter) {
  const int n = data.size();
  if (n == 0) throw std::invalid_argument("log_marginal_likelihood: empty dataset");
  Matrix gram = parallel::gram(kernel, data.x);
  gram.diagonal().array() += data.noise_variance;
  const JitteredCholesky chol = jittered_cholesky(gram, kernel.output_scale(), jitter);
  Vector residual(n);
  for (int i = 0; i < n; ++i) residual(i) = data.y(i) - mean(data.x.col(i));
  const Matrix lower = chol.llt.matrixL();
  const Vector v = lower.triangularView<Eigen::Lower>().solve(residual);
  return -0.5 * v.squaredNorm() - lower.diagonal().array().log().sum() - 0.5 * n * kLog2Pi;
}

double profiled_log_likelihood(KernelFamily family, const Vector& theta, const Dataset& data,
                               bool fit_noise, bool constant_mean, const JitterPolicy& jitter,
                               Vector* grad, double* mean_constant) {
  const int n = data.size();
  const int d = data.dim();
  const Kernel kernel = Kernel::from_log_params(family, theta.head(d + 1));
  const double noise = fit_noise ? std::exp(theta(d + 1)) : data.noise_variance;

  Matrix gram = parallel::gram(kernel, data.x);
  gram.diagonal().array() += noise;
  const JitteredCholesky chol = jittered_cholesky(gram, kernel.output_scale(), jitter);

  double c = 0.0;
  if (constant_mean) {
    const Vector u = chol.llt.solve(Vector::Ones(n));
    c = u.dot(data.y) / u.sum();
  }
  if (mean_constant != nullptr) *mean_constant = c;
  const Vector residual = data.y.array() - c;
  const Vector alpha = chol.llt.solve(residual);
  const Matrix lower = chol.llt.matrixL();
  const double value = -0.5 * residual.dot(alpha) - lower.diagonal().array().log().sum() -
                       0.5 * n * kLog2Pi;

  if (grad != nullptr) {
    // d/dtheta = 1/2 tr((alpha alpha^T - K^-1) dK/dtheta). The profiled
    // constant drops out because the likelihood is stationary in it.
    const Matrix w = alpha * alpha.transpose() - chol.llt.solve(Matrix::Identity(n, n));
    grad->setZero(theta.size());
    for (int j = 0; j < n; ++j) {
      for (int i = j; i < n; ++i) {
        const double weight = (i == j ? 0.5 : 1.0) * w(i, j);
        grad->head(d + 1) += weight * kernel.log_param_grad(data.x.col(i), data.x.col(j));
      }
    }
    if (fit_noise) (*grad)(d + 1) = 0.5 * noise * w.trace();
  }
  return value;
}

FitResult fit_hyperparameters(const Dataset& data, const FitOptions& options) {
  const int n = data.size();
  const int d = data.dim();
  if (n < 2) throw std::invalid_argument("fit_hyperparameters: need at least 2 records");

  double shift = 0.0;
  double scale = 1.0;
  if (options.standardize) {
    shift = data.y.mean();
    const double sd = std::sqrt((data.y.array() - shift).square().mean());
    scale = sd > 1e-12 * std::max(1.0, std::abs(shift)) ? sd : 1.0;
  }
  Dataset work(data.x, (data.y.array() - shift) / scale, data.noise_variance / (scale * scale));

  // Lengthscale boxes are relative to each input's spread in the data.
  Vector spread(d);
  for (int i = 0; i < d; ++i) {
    const double r = data.x.row(i).maxCoeff() - data.x.row(i).minCoeff();
    spread(i) = r > 0.0 ? r : 1.0;
  }
  const int p = d + 1 + (options.fit_noise ? 1 : 0);
  Vector lower(p);
  Vector upper(p);
  Vector start_lo(p);
  Vector start_hi(p);
  for (int i = 0; i < d; ++i) {
    lower(i) = std::log(options.param_min * spread(i));
    upper(i) = std::log(options.param_max * spread(i));
    start_lo(i) = std::log(0.05 * spread(i));
    start_hi(i) = std::log(2.0 * spread(i));
  }
  lower(d) = std::log(options.param_min);
  upper(d) = std::log(options.param_max);
  start_lo(d) = std::log(0.1);
  start_hi(d) = std::log(10.0);
  if (options.fit_noise) {
    lower(d + 1) = std::log(options.noise_min);
    upper(d + 1) = std::log(options.noise_max);
    start_lo(d + 1) = std::log(std::max(options.noise_min, 1e-4));
    start_hi(d + 1) = std::log(std::max(options.noise_min, 1e-1));
  }

  std::vector<Vector> starts;
  const PointSet unit = scrambled_halton(options.restarts, p, options.seed);
  for (int r = 0; r < unit.cols(); ++r)
    starts.push_back((start_lo.array() + unit.col(r).array() * (start_hi - start_lo).array()).matrix());
  if (options.warm_start && options.warm_start->dim() == d) {
    Vector theta(p);
    theta.head(d + 1) = options.warm_start->scaled(1.0 / (scale * scale)).log_params();
    if (options.fit_noise) theta(d + 1) = std::log(std::max(options.noise_min, 1e-4));
    starts.push_back(theta.cwiseMax(lower).cwiseMin(upper));
  }

  const Objective objective = [&](const Vector& theta, Vector* grad) {
    try {
      return profiled_log_likelihood(options.family, theta, work, options.fit_noise,
                                     options.constant_mean, options.jitter, grad, nullptr);
    } catch (const FactorizationError&) {
      if (grad != nullptr) grad->setZero(theta.size());
      return -std::numeric_limits<double>::infinity();
    }
  };

  LocalSearchOptions local;
  local.max_iterations = options.max_iterations;
  local.gradient_tolerance = 1e-6;
  local.initial_step = 1.0;
  const int count = static_cast<int>(starts.size());
  std::vector<LocalSearchResult> results(count);
  std::vector<double> start_values(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < count; ++r) {
    start_values[r] = objective(starts[r].cwiseMax(lower).cwiseMin(upper), nullptr);
    results[r] = maximize_box_lbfgs(objective, lower, upper, starts[r], local);
  }

  int best = -1;
  bool improved = false;
  for (int r = 0; r < count; ++r) {
    if (!std::isfinite(results[r].value)) continue;
    if (best < 0 || results[r].value > results[best].value) best = r;
    if (results[r].value > start_values[r] + 1e-10 * std::max(1.0, std::abs(start_values[r])))
      improved = true;
  }
  if (best < 0) throw FactorizationError("fit_hyperparameters: no start point was factorizable");

  const Vector& theta = results[best].x;
  double c = 0.0;
  profiled_log_likelihood(options.family, theta, work, options.fit_noise, options.constant_mean,
                          options.jitter, nullptr, &c);
  const Kernel fitted = Kernel::from_log_params(options.family, theta.head(d + 1)).scaled(scale * scale);
  const bool has_constant = options.constant_mean || shift != 0.0;
  FitResult out{fitted,
                has_constant ? MeanFunction::constant(shift + scale * c) : MeanFunction::zero(),
                options.fit_noise ? std::exp(theta(d + 1)) * scale * scale : data.noise_variance,
                results[best].value - n * std::log(scale), improved};
  return out;
}

}  // namespace greybox
