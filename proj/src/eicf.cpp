#include "greybox/eicf.h"

#include <stdexcept>

namespace greybox {

namespace {

// dC_n(x)/dx_l for each coordinate. Where the factor has a zero pivot the
// derivative is not defined; those directions contribute nothing.
std::vector<Matrix> factor_grad(const MoGpPosterior& post, ConstPoint x, const Matrix& chol) {
  const int k = post.outputs();
  const std::vector<Matrix> dk = post.cov_matrix_grad(x);
  std::vector<Matrix> out(dk.size(), Matrix::Zero(k, k));
  if (chol.diagonal().minCoeff() <= 0.0) return out;
  for (std::size_t l = 0; l < dk.size(); ++l) out[l] = cholesky_derivative(chol, dk[l]);
  return out;
}

void check_draws(const MoGpPosterior& post, const Matrix& z) {
  if (z.rows() != post.outputs()) throw std::invalid_argument("EI-CF draws must be k-vectors");
  if (z.cols() < 1) throw std::invalid_argument("EI-CF needs at least one draw");
}

}  // namespace

Estimate eicf_value(const MoGpPosterior& post, const OuterFunction& g, const Incumbent& incumbent,
                    ConstPoint x, const Matrix& z) {
  check_draws(post, z);
  const Vector mu = post.mean(x);
  const Matrix chol = cholesky_of_cov(post, x);
  Vector samples(z.cols());
  for (Eigen::Index m = 0; m < z.cols(); ++m)
    samples(m) = std::max(0.0, g(mu + chol * z.col(m)) - incumbent.value);
  return summarize_sample(samples);
}

Vector eicf_gradient_sample(const MoGpPosterior& post, const OuterFunction& g, const Incumbent& incumbent,
                            ConstPoint x, const Vector& z) {
  const Vector mu = post.mean(x);
  const Matrix chol = cholesky_of_cov(post, x);
  const Vector y = mu + chol * z;
  if (!(g(y) > incumbent.value)) return Vector::Zero(x.size());
  const Vector gy = g.grad(y);
  const Matrix jac = post.mean_jacobian(x);
  const std::vector<Matrix> dc = factor_grad(post, x, chol);
  Vector out = jac.transpose() * gy;
  for (std::size_t l = 0; l < dc.size(); ++l) out(l) += gy.dot(dc[l] * z);
  return out;
}

double eicf_saa(const MoGpPosterior& post, const OuterFunction& g, const Incumbent& incumbent,
                ConstPoint x, const Matrix& z, Vector* grad) {
  check_draws(post, z);
  const int k = post.outputs();
  const Vector mu = post.mean(x);
  const Matrix chol = cholesky_of_cov(post, x);
  double total = 0.0;
  Vector gsum = Vector::Zero(k);
  Matrix outer = Matrix::Zero(k, k);  // sum of grad g(y_m) z_m^T over improving draws
  for (Eigen::Index m = 0; m < z.cols(); ++m) {
    const Vector y = mu + chol * z.col(m);
    const double imp = g(y) - incumbent.value;
    if (!(imp > 0.0)) continue;
    total += imp;
    if (grad != nullptr) {
      const Vector gy = g.grad(y);
      gsum += gy;
      outer.noalias() += gy * z.col(m).transpose();
    }
  }
  const double inv_m = 1.0 / static_cast<double>(z.cols());
  if (grad != nullptr) {
    Vector out = post.mean_jacobian(x).transpose() * gsum;
    if (outer.squaredNorm() > 0.0) {
      const std::vector<Matrix> dc = factor_grad(post, x, chol);
      for (std::size_t l = 0; l < dc.size(); ++l) out(l) += (dc[l].array() * outer.array()).sum();
    }
    *grad = out * inv_m;
  }
  return total * inv_m;
}

}  // namespace greybox
