#pragma once

#include <cstdint>
#include <optional>

#include "greybox/kernel.h"
#include "greybox/linalg.h"
#include "greybox/types.h"

namespace greybox {

/// Evaluations (x_i, y_i) in evaluation order, sharing one noise variance.
struct Dataset {
  PointSet x;  ///< d x n
  Vector y;
  double noise_variance = 0.0;

  Dataset() = default;
  explicit Dataset(int dim, double noise = 0.0);
  Dataset(PointSet x, Vector y, double noise = 0.0);

  int size() const { return static_cast<int>(y.size()); }
  int dim() const { return static_cast<int>(x.rows()); }
  void add(ConstPoint point, double value);
};

/// Scalar-valued Gaussian process posterior. Implemented by GpPosterior and by
/// linear functionals of multi-output posteriors.
class ScalarPosterior {
 public:
  virtual ~ScalarPosterior() = default;
  virtual int dim() const = 0;
  virtual double mean(ConstPoint x) const = 0;
  virtual Vector mean_grad(ConstPoint x) const = 0;
  virtual double cov(ConstPoint x, ConstPoint x2) const = 0;
  /// Posterior variance, clamped at zero (see GpPosterior::variance_floor).
  virtual double variance(ConstPoint x) const = 0;
  virtual Vector variance_grad(ConstPoint x) const = 0;
  virtual double noise_variance() const = 0;
};

/// Exact GP posterior conditioned on a Dataset. Immutable after construction;
/// concurrent reads are safe.
class GpPosterior final : public ScalarPosterior {
 public:
  /// Factorizes K0(X, X) + noise*I with the jitter policy. Throws
  /// FactorizationError when the jitter budget is exhausted.
  GpPosterior(Kernel kernel, MeanFunction mean, Dataset data, const JitterPolicy& jitter = {});

  int dim() const override { return kernel_.dim(); }
  double mean(ConstPoint x) const override;
  Vector mean_grad(ConstPoint x) const override;
  double cov(ConstPoint x, ConstPoint x2) const override;
  double variance(ConstPoint x) const override;
  Vector variance_grad(ConstPoint x) const override;
  double noise_variance() const override { return data_.noise_variance; }

  /// Gradient of cov(x, x2) with respect to x.
  Vector cov_grad_first(ConstPoint x, ConstPoint x2) const;
  /// Joint posterior covariance over a point set (no clamping).
  Matrix cov_matrix(const PointSet& points) const;

  /// K0(x_i, x) for every datum.
  Vector prior_row(ConstPoint x) const;
  /// d/dx K0(x_i, x), one row per datum (n x d).
  Matrix prior_row_jacobian(ConstPoint x) const;
  /// (K0(X,X) + noise*I + jitter*I)^-1 v.
  Vector solve(const Vector& v) const;

  /// Variances at or below this are reported as zero. For a noiseless model it
  /// is the applied jitter (plus 1e-10 x scale): the factorized matrix cannot
  /// resolve anything smaller, and posterior variance at a datum never exceeds it.
  double variance_floor() const { return floor_; }
  double jitter() const { return chol_.jitter; }

  const Kernel& kernel() const { return kernel_; }
  const MeanFunction& mean_function() const { return mean_; }
  const Dataset& data() const { return data_; }
  const Vector& weights() const { return alpha_; }
  const Matrix& cholesky_lower() const { return lower_; }

 private:
  double raw_variance(ConstPoint x, Vector* row) const;

  Kernel kernel_;
  MeanFunction mean_;
  Dataset data_;
  JitteredCholesky chol_;
  Matrix lower_;
  Vector alpha_;
  double floor_ = 0.0;
};

/// Log density of y under N(mu0(X), K0(X,X) + noise*I + jitter*I), the jitter
/// chosen by the same policy the posterior uses.
double log_marginal_likelihood(const Kernel& kernel, const MeanFunction& mean, const Dataset& data,
                               const JitterPolicy& jitter = {});

struct FitOptions {
  KernelFamily family = KernelFamily::Matern52;
  int restarts = 8;
  std::uint64_t seed = 0;
  bool fit_noise = false;
  /// Used when fit_noise is false, in the data's units.
  double noise_variance = 0.0;
  bool constant_mean = true;
  bool standardize = true;
  /// Box for lengthscales and output scale (standardized units).
  double param_min = 1e-3;
  double param_max = 1e3;
  /// Box for the noise variance when fitted (standardized units).
  double noise_min = 1e-6;
  double noise_max = 1e3;
  int max_iterations = 200;
  JitterPolicy jitter;
  /// Optional extra start from previously fitted hyperparameters (data units).
  std::optional<Kernel> warm_start;
};

struct FitResult {
  Kernel kernel;
  MeanFunction mean;
  double noise_variance = 0.0;
  double log_likelihood = 0.0;
  /// False when no local search improved on its start point (the best start is returned).
  bool improved = true;
};

/// Maximum-likelihood hyperparameters by multistart bounded quasi-Newton in
/// log-parameter space. Outputs are standardized before fitting and the
/// returned hyperparameters are mapped back to data units. A constant mean is
/// profiled out in closed form. Deterministic given options.seed.
FitResult fit_hyperparameters(const Dataset& data, const FitOptions& options);

/// Profiled log likelihood and its gradient in theta = (log l, log s[, log noise]).
/// Exposed for tests; `mean_constant` receives the profiled constant when non-null.
double profiled_log_likelihood(KernelFamily family, const Vector& theta, const Dataset& data,
                               bool fit_noise, bool constant_mean, const JitterPolicy& jitter,
                               Vector* grad, double* mean_constant);

}  // namespace greybox
