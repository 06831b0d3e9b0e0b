#include "greybox/mogp.h"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "greybox/rng.h"

namespace greybox {

std::string to_string(MultiOutputVariant variant) {
  switch (variant) {
    case MultiOutputVariant::Independent:
      return "independent";
    case MultiOutputVariant::Coregionalized:
      return "icm";
    case MultiOutputVariant::LatentFactor:
      return "latent";
    case MultiOutputVariant::AugmentedInput:
      return "augmented";
  }
  return "unknown";
}

MultiOutputVariant multi_output_variant_from_string(const std::string& name) {
  if (name == "independent") return MultiOutputVariant::Independent;
  if (name == "icm" || name == "coregionalized") return MultiOutputVariant::Coregionalized;
  if (name == "latent" || name == "latent-factor") return MultiOutputVariant::LatentFactor;
  if (name == "augmented") return MultiOutputVariant::AugmentedInput;
  throw std::invalid_argument("unknown multi-output model '" + name + "'");
}

MultiOutputModel MultiOutputModel::independent(std::vector<Kernel> kernels, Vector means) {
  if (kernels.empty()) throw std::invalid_argument("independent model needs at least one kernel");
  if (static_cast<Eigen::Index>(kernels.size()) != means.size())
    throw std::invalid_argument("independent model: one mean per kernel");
  MultiOutputModel m;
  m.variant_ = MultiOutputVariant::Independent;
  m.outputs_ = static_cast<int>(kernels.size());
  m.dim_ = kernels.front().dim();
  for (const Kernel& k : kernels)
    if (k.dim() != m.dim_) throw std::invalid_argument("independent model: dimension mismatch");
  m.kernels_ = std::move(kernels);
  m.coef_ = std::move(means);
  return m;
}

MultiOutputModel MultiOutputModel::coregionalized(Matrix factor, const Kernel& shared, Vector means) {
  if (factor.rows() != factor.cols() || factor.rows() != means.size() || factor.rows() < 1)
    throw std::invalid_argument("coregionalized model: factor must be k x k with k means");
  MultiOutputModel m;
  m.variant_ = MultiOutputVariant::Coregionalized;
  m.outputs_ = static_cast<int>(factor.rows());
  m.dim_ = shared.dim();
  m.kernels_ = {Kernel(shared.family(), shared.lengthscales(), 1.0)};
  m.factor_ = factor.triangularView<Eigen::Lower>();
  m.coef_ = std::move(means);
  return m;
}

MultiOutputModel MultiOutputModel::latent_factor(Kernel target, std::vector<Kernel> biases,
                                                 double target_mean, Vector bias_means) {
  if (static_cast<Eigen::Index>(biases.size()) != bias_means.size())
    throw std::invalid_argument("latent factor model: one mean per bias kernel");
  MultiOutputModel m;
  m.variant_ = MultiOutputVariant::LatentFactor;
  m.outputs_ = static_cast<int>(biases.size()) + 1;
  m.dim_ = target.dim();
  m.kernels_.push_back(std::move(target));
  for (Kernel& b : biases) {
    if (b.dim() != m.dim_) throw std::invalid_argument("latent factor model: dimension mismatch");
    m.kernels_.push_back(std::move(b));
  }
  m.coef_.resize(m.outputs_);
  m.coef_.head(m.outputs_ - 1) = bias_means;
  m.coef_(m.outputs_ - 1) = target_mean;
  return m;
}

MultiOutputModel MultiOutputModel::augmented(Kernel kernel, Vector tags, double mean) {
  if (tags.size() < 1 || kernel.dim() < 2)
    throw std::invalid_argument("augmented model: needs tags and a kernel over (x, tag)");
  MultiOutputModel m;
  m.variant_ = MultiOutputVariant::AugmentedInput;
  m.outputs_ = static_cast<int>(tags.size());
  m.dim_ = kernel.dim() - 1;
  m.kernels_ = {std::move(kernel)};
  m.tags_ = std::move(tags);
  m.coef_ = Vector::Constant(1, mean);
  return m;
}

Vector MultiOutputModel::augment(ConstPoint x, int j) const {
  Vector z(dim_ + 1);
  z.head(dim_) = x;
  z(dim_) = tags_(j);
  return z;
}

Vector MultiOutputModel::mean_design(int j) const {
  switch (variant_) {
    case MultiOutputVariant::Independent:
    case MultiOutputVariant::Coregionalized:
      return Vector::Unit(outputs_, j);
    case MultiOutputVariant::LatentFactor: {
      Vector row = Vector::Unit(outputs_, outputs_ - 1);
      row(j) = 1.0;
      return row;
    }
    case MultiOutputVariant::AugmentedInput:
      return Vector::Ones(1);
  }
  return {};
}

double MultiOutputModel::prior_mean(int j) const { return mean_design(j).dot(coef_); }

MultiOutputModel MultiOutputModel::with_mean_coefficients(Vector coef) const {
  if (coef.size() != coef_.size()) throw std::invalid_argument("mean coefficient size mismatch");
  MultiOutputModel m = *this;
  m.coef_ = std::move(coef);
  return m;
}

double MultiOutputModel::prior_cov(ConstPoint x, int j, ConstPoint x2, int j2) const {
  switch (variant_) {
    case MultiOutputVariant::Independent:
      return j == j2 ? kernels_[j](x, x2) : 0.0;
    case MultiOutputVariant::Coregionalized:
      return factor_.row(j).dot(factor_.row(j2)) * kernels_[0](x, x2);
    case MultiOutputVariant::LatentFactor: {
      double v = kernels_[0](x, x2);
      if (j == j2 && j != outputs_ - 1) v += kernels_[1 + j](x, x2);
      return v;
    }
    case MultiOutputVariant::AugmentedInput:
      return kernels_[0](augment(x, j), augment(x2, j2));
  }
  return 0.0;
}

Vector MultiOutputModel::prior_cov_grad_first(ConstPoint x, int j, ConstPoint x2, int j2) const {
  switch (variant_) {
    case MultiOutputVariant::Independent:
      return j == j2 ? kernels_[j].grad_first(x, x2) : Vector::Zero(dim_);
    case MultiOutputVariant::Coregionalized:
      return factor_.row(j).dot(factor_.row(j2)) * kernels_[0].grad_first(x, x2);
    case MultiOutputVariant::LatentFactor: {
      Vector g = kernels_[0].grad_first(x, x2);
      if (j == j2 && j != outputs_ - 1) g += kernels_[1 + j].grad_first(x, x2);
      return g;
    }
    case MultiOutputVariant::AugmentedInput:
      return kernels_[0].grad_first(augment(x, j), augment(x2, j2)).head(dim_);
  }
  return {};
}

Matrix MultiOutputModel::prior_cov_matrix(ConstPoint x, ConstPoint x2) const {
  Matrix k(outputs_, outputs_);
  for (int j = 0; j < outputs_; ++j)
    for (int j2 = 0; j2 < outputs_; ++j2) k(j, j2) = prior_cov(x, j, x2, j2);
  return k;
}

int MultiOutputModel::num_params() const {
  switch (variant_) {
    case MultiOutputVariant::Independent:
    case MultiOutputVariant::LatentFactor:
      return static_cast<int>(kernels_.size()) * (dim_ + 1);
    case MultiOutputVariant::Coregionalized:
      return dim_ + outputs_ * (outputs_ + 1) / 2;
    case MultiOutputVariant::AugmentedInput:
      return dim_ + 2;
  }
  return 0;
}

Vector MultiOutputModel::params() const {
  Vector theta(num_params());
  if (variant_ == MultiOutputVariant::Coregionalized) {
    theta.head(dim_) = kernels_[0].lengthscales().array().log().matrix();
    int p = dim_;
    for (int a = 0; a < outputs_; ++a)
      for (int b = 0; b <= a; ++b) theta(p++) = a == b ? std::log(factor_(a, a)) : factor_(a, b);
    return theta;
  }
  int p = 0;
  for (const Kernel& k : kernels_) {
    theta.segment(p, k.num_params()) = k.log_params();
    p += k.num_params();
  }
  return theta;
}

MultiOutputModel MultiOutputModel::with_params(const Vector& theta) const {
  if (theta.size() != num_params()) throw std::invalid_argument("parameter vector size mismatch");
  MultiOutputModel m = *this;
  if (variant_ == MultiOutputVariant::Coregionalized) {
    m.kernels_ = {Kernel(kernels_[0].family(), theta.head(dim_).array().exp().matrix(), 1.0)};
    int p = dim_;
    m.factor_.setZero(outputs_, outputs_);
    for (int a = 0; a < outputs_; ++a)
      for (int b = 0; b <= a; ++b) m.factor_(a, b) = a == b ? std::exp(theta(p++)) : theta(p++);
    return m;
  }
  int p = 0;
  for (Kernel& k : m.kernels_) {
    const int q = k.num_params();
    k = Kernel::from_log_params(k.family(), theta.segment(p, q));
    p += q;
  }
  return m;
}

Vector MultiOutputModel::param_grad(ConstPoint x, int j, ConstPoint x2, int j2) const {
  Vector g = Vector::Zero(num_params());
  const int q = dim_ + 1;
  switch (variant_) {
    case MultiOutputVariant::Independent:
      if (j == j2) g.segment(j * q, q) = kernels_[j].log_param_grad(x, x2);
      break;
    case MultiOutputVariant::Coregionalized: {
      const double base = kernels_[0](x, x2);
      g.head(dim_) = factor_.row(j).dot(factor_.row(j2)) * kernels_[0].log_param_grad(x, x2).head(dim_);
      int p = dim_;
      for (int a = 0; a < outputs_; ++a) {
        for (int b = 0; b <= a; ++b, ++p) {
          double ds = 0.0;
          if (j == a) ds += factor_(j2, b);
          if (j2 == a) ds += factor_(j, b);
          if (a == b) ds *= factor_(a, a);
          g(p) = ds * base;
        }
      }
      break;
    }
    case MultiOutputVariant::LatentFactor:
      g.head(q) = kernels_[0].log_param_grad(x, x2);
      if (j == j2 && j != outputs_ - 1) g.segment((1 + j) * q, q) = kernels_[1 + j].log_param_grad(x, x2);
      break;
    case MultiOutputVariant::AugmentedInput:
      g = kernels_[0].log_param_grad(augment(x, j), augment(x2, j2));
      break;
  }
  return g;
}

TaggedDataset::TaggedDataset(int dim, int outputs, double noise_)
    : x(dim, 0), y(0), cost(0), noise(Vector::Constant(outputs, noise_)) {}

void TaggedDataset::add(ConstPoint point, int j, double value, double c) {
  if (point.size() != x.rows()) throw std::invalid_argument("TaggedDataset::add: dimension mismatch");
  if (j < 0 || j >= outputs()) throw std::invalid_argument("TaggedDataset::add: output index out of range");
  if (c < 0.0) throw std::invalid_argument("TaggedDataset::add: negative cost");
  const Eigen::Index n = y.size();
  x.conservativeResize(Eigen::NoChange, n + 1);
  x.col(n) = point;
  output.push_back(j);
  y.conservativeResize(n + 1);
  y(n) = value;
  cost.conservativeResize(n + 1);
  cost(n) = c;
}

MoGpPosterior::MoGpPosterior(MultiOutputModel model, TaggedDataset data, const JitterPolicy& jitter)
    : model_(std::move(model)), data_(std::move(data)) {
  if (data_.outputs() != model_.outputs())
    throw std::invalid_argument("MoGpPosterior: dataset and model disagree on output count");
  const int n = data_.size();
  if (n > 0 && data_.dim() != model_.dim())
    throw std::invalid_argument("MoGpPosterior: dimension mismatch");
  if (n == 0) {
    scale_ = 0.0;
    for (int j = 0; j < outputs(); ++j) {
      const Vector origin = Vector::Zero(dim());
      scale_ = std::max(scale_, model_.prior_cov(origin, j, origin, j));
    }
    return;
  }
  Matrix gram(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (int c = 0; c < n; ++c)
    for (int r = c; r < n; ++r) {
      const double v = model_.prior_cov(data_.x.col(r), data_.output[r], data_.x.col(c), data_.output[c]);
      gram(r, c) = v;
      gram(c, r) = v;
    }
  scale_ = gram.diagonal().mean();
  for (int i = 0; i < n; ++i) gram(i, i) += data_.noise(data_.output[i]);
  chol_ = jittered_cholesky(gram, scale_, jitter);
  lower_ = chol_.llt.matrixL();
  Vector residual(n);
  for (int i = 0; i < n; ++i) residual(i) = data_.y(i) - model_.prior_mean(data_.output[i]);
  alpha_ = chol_.llt.solve(residual);
}

Vector MoGpPosterior::prior_row(ConstPoint x, int j) const {
  const int n = data_.size();
  Vector row(n);
  for (int i = 0; i < n; ++i) row(i) = model_.prior_cov(data_.x.col(i), data_.output[i], x, j);
  return row;
}

Matrix MoGpPosterior::prior_row_jacobian(ConstPoint x, int j) const {
  const int n = data_.size();
  Matrix jac(n, dim());
  for (int i = 0; i < n; ++i)
    jac.row(i) = model_.prior_cov_grad_first(x, j, data_.x.col(i), data_.output[i]).transpose();
  return jac;
}

Vector MoGpPosterior::solve(const Vector& v) const {
  if (v.size() == 0) return v;
  return chol_.llt.solve(v);
}

double MoGpPosterior::variance_floor(int j) const {
  return 1e-10 * scale_ + (data_.noise(j) == 0.0 ? chol_.jitter : 0.0);
}

double MoGpPosterior::mean(ConstPoint x, int j) const {
  double m = model_.prior_mean(j);
  if (data_.size() > 0) m += prior_row(x, j).dot(alpha_);
  return m;
}

Vector MoGpPosterior::mean(ConstPoint x) const {
  Vector m(outputs());
  for (int j = 0; j < outputs(); ++j) m(j) = mean(x, j);
  return m;
}

Vector MoGpPosterior::mean_grad(ConstPoint x, int j) const {
  if (data_.size() == 0) return Vector::Zero(dim());
  return prior_row_jacobian(x, j).transpose() * alpha_;
}

Matrix MoGpPosterior::mean_jacobian(ConstPoint x) const {
  Matrix jac(outputs(), dim());
  for (int j = 0; j < outputs(); ++j) jac.row(j) = mean_grad(x, j).transpose();
  return jac;
}

double MoGpPosterior::cov(ConstPoint x, int j, ConstPoint x2, int j2) const {
  double c = model_.prior_cov(x, j, x2, j2);
  if (data_.size() > 0) c -= prior_row(x, j).dot(solve(prior_row(x2, j2)));
  if (j == j2 && x == x2 && c <= variance_floor(j)) return 0.0;
  return c;
}

Vector MoGpPosterior::cov_grad_first(ConstPoint x, int j, ConstPoint x2, int j2) const {
  Vector g = model_.prior_cov_grad_first(x, j, x2, j2);
  if (data_.size() > 0) g -= prior_row_jacobian(x, j).transpose() * solve(prior_row(x2, j2));
  return g;
}

Matrix MoGpPosterior::cross_cov(ConstPoint x, ConstPoint x2) const {
  Matrix k = model_.prior_cov_matrix(x, x2);
  const int n = data_.size();
  if (n == 0) return k;
  Matrix r1(n, outputs());
  Matrix r2(n, outputs());
  for (int j = 0; j < outputs(); ++j) {
    r1.col(j) = prior_row(x, j);
    r2.col(j) = prior_row(x2, j);
  }
  const auto lower = lower_.triangularView<Eigen::Lower>();
  return k - lower.solve(r1).transpose() * lower.solve(r2);
}

Matrix MoGpPosterior::cov_matrix(ConstPoint x) const {
  Matrix k = cross_cov(x, x);
  k = 0.5 * (k + k.transpose()).eval();
  for (int j = 0; j < outputs(); ++j) {
    if (k(j, j) <= variance_floor(j)) {
      k.row(j).setZero();
      k.col(j).setZero();
    }
  }
  return k;
}

std::vector<Matrix> MoGpPosterior::cov_matrix_grad(ConstPoint x) const {
  const int k = outputs();
  std::vector<Matrix> grads(dim(), Matrix::Zero(k, k));
  std::vector<Matrix> jac(k);
  std::vector<Vector> u(k);
  for (int j = 0; j < k; ++j) {
    if (data_.size() > 0) {
      jac[j] = prior_row_jacobian(x, j);
      u[j] = solve(prior_row(x, j));
    }
  }
  for (int j = 0; j < k; ++j) {
    for (int j2 = 0; j2 < k; ++j2) {
      Vector g = model_.prior_cov_grad_first(x, j, x, j2) + model_.prior_cov_grad_first(x, j2, x, j);
      if (data_.size() > 0) g -= jac[j].transpose() * u[j2] + jac[j2].transpose() * u[j];
      for (int l = 0; l < dim(); ++l) grads[l](j, j2) = g(l);
    }
  }
  return grads;
}

Matrix MoGpPosterior::joint_cov(const std::vector<TaggedPoint>& points) const {
  const int m = static_cast<int>(points.size());
  Matrix k(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b <= a; ++b) {
      k(a, b) = model_.prior_cov(points[a].x, points[a].output, points[b].x, points[b].output);
      k(b, a) = k(a, b);
    }
  const int n = data_.size();
  if (n == 0) return k;
  Matrix r(n, m);
  for (int a = 0; a < m; ++a) r.col(a) = prior_row(points[a].x, points[a].output);
  const Matrix v = lower_.triangularView<Eigen::Lower>().solve(r);
  k -= v.transpose() * v;
  return 0.5 * (k + k.transpose());
}

Matrix cholesky_of_cov(const MoGpPosterior& post, ConstPoint x) {
  double tol = 0.0;
  for (int j = 0; j < post.outputs(); ++j) tol = std::max(tol, post.variance_floor(j));
  return lower_cholesky_psd(post.cov_matrix(x), tol);
}

LinearFunctionalPosterior::LinearFunctionalPosterior(const MoGpPosterior& post, Vector p)
    : post_(&post), p_(std::move(p)) {
  if (p_.size() != post.outputs()) throw std::invalid_argument("functional weight size mismatch");
  if (!p_.allFinite()) throw std::invalid_argument("functional weights must be finite");
}

double LinearFunctionalPosterior::mean(ConstPoint x) const { return p_.dot(post_->mean(x)); }

Vector LinearFunctionalPosterior::mean_grad(ConstPoint x) const {
  return post_->mean_jacobian(x).transpose() * p_;
}

double LinearFunctionalPosterior::cov(ConstPoint x, ConstPoint x2) const {
  if (x == x2) return variance(x);
  return p_.dot(post_->cross_cov(x, x2) * p_);
}

double LinearFunctionalPosterior::variance(ConstPoint x) const {
  const double v = p_.dot(post_->cross_cov(x, x) * p_);
  double floor = 0.0;
  for (int j = 0; j < post_->outputs(); ++j) floor += p_(j) * p_(j) * post_->variance_floor(j);
  return v <= floor ? 0.0 : v;
}

Vector LinearFunctionalPosterior::variance_grad(ConstPoint x) const {
  const std::vector<Matrix> grads = post_->cov_matrix_grad(x);
  Vector g(dim());
  for (int l = 0; l < dim(); ++l) g(l) = p_.dot(grads[l] * p_);
  return g;
}

double LinearFunctionalPosterior::noise_variance() const {
  double v = 0.0;
  for (int j = 0; j < post_->outputs(); ++j) v += p_(j) * p_(j) * post_->noise(j);
  return v;
}

LinearFunctionalPosterior LinearFunctionalPosterior::scaled(double q) const {
  return LinearFunctionalPosterior(*post_, q * p_);
}

Matrix sample_joint(const MoGpPosterior& post, const std::vector<TaggedPoint>& points, int count,
                    std::uint64_t seed) {
  const int m = static_cast<int>(points.size());
  Vector mu(m);
  for (int a = 0; a < m; ++a) mu(a) = post.mean(points[a].x, points[a].output);
  const Matrix cov = post.joint_cov(points);
  const Eigen::LDLT<Matrix> ldlt(cov);
  const Vector root_d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  CounterRng rng(seed, 0x5a3e);
  const Matrix z = rng.normal_matrix(m, count);
  Matrix scaled = ldlt.matrixL() * (root_d.asDiagonal() * z);
  scaled = ldlt.transpositionsP().transpose() * scaled;
  return scaled.colwise() + mu;
}

}  // namespace greybox
