#include "greybox/linalg.h"

#include <cmath>
#include <string>

namespace greybox {

JitteredCholesky jittered_cholesky(const Matrix& a, double scale, const JitterPolicy& policy) {
  if (!a.allFinite()) throw FactorizationError("covariance matrix has non-finite entries");
  const double base = scale > 0.0 ? scale : 1.0;
  JitteredCholesky out;
  for (double rel = policy.initial; rel <= policy.maximum * (1.0 + 1e-12); rel *= 2.0) {
    Matrix shifted = a;
    shifted.diagonal().array() += rel * base;
    out.llt.compute(shifted);
    if (out.llt.info() == Eigen::Success && out.llt.matrixLLT().diagonal().minCoeff() > 0.0) {
      out.jitter = rel * base;
      return out;
    }
  }
  throw FactorizationError("Cholesky failed with jitter up to " + std::to_string(policy.maximum) +
                           " x scale");
}

Matrix lower_cholesky_psd(const Matrix& a, double tol) {
  const Eigen::Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (pivot < -tol) throw FactorizationError("matrix is not positive semidefinite");
    if (pivot <= tol) continue;  // degenerate direction: column stays zero
    const double root = std::sqrt(pivot);
    l(j, j) = root;
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / root;
  }
  return l;
}

Matrix cholesky_derivative(const Matrix& chol, const Matrix& d_a) {
  const auto lower = chol.triangularView<Eigen::Lower>();
  // X = L^-1 dA L^-T
  Matrix x = lower.solve(d_a);
  x = lower.solve(x.transpose()).transpose();
  Matrix phi = x.triangularView<Eigen::Lower>();
  phi.diagonal() *= 0.5;
  return chol * phi;
}

}  // namespace greybox
