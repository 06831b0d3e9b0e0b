#pragma once

#include <stdexcept>

#include <Eigen/Cholesky>

#include "greybox/types.h"

namespace greybox {

/// Raised when a covariance matrix cannot be factorized within the jitter budget.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Diagonal jitter schedule, relative to the covariance scale: start at
/// `initial`, double on failure, give up beyond `maximum`.
struct JitterPolicy {
  double initial = 1e-8;
  double maximum = 1e-4;
};

struct JitteredCholesky {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;  ///< absolute jitter added to the diagonal
};

/// Cholesky of a + jitter*I following the policy; `scale` is the magnitude the
/// relative jitter refers to (typically the prior output scale).
JitteredCholesky jittered_cholesky(const Matrix& a, double scale, const JitterPolicy& policy = {});

/// Lower Cholesky factor of a symmetric positive semidefinite matrix. Pivots at
/// or below `tol` zero their column, so a zero matrix yields a zero factor.
/// Throws FactorizationError on a pivot below -tol.
Matrix lower_cholesky_psd(const Matrix& a, double tol = 1e-12);

/// Directional derivative of the lower Cholesky factor L of A along dA:
/// dL = L * Phi(L^-1 dA L^-T), Phi keeping the lower triangle with a halved diagonal.
/// L must have a strictly positive diagonal.
Matrix cholesky_derivative(const Matrix& chol, const Matrix& d_a);

}  // namespace greybox
