#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "greybox/gp.h"
#include "greybox/kernel.h"
#include "greybox/linalg.h"
#include "greybox/types.h"

namespace greybox {

enum class MultiOutputVariant {
  Independent,     ///< k unrelated single-output GPs
  Coregionalized,  ///< Sigma (x) K'(x, x'), Sigma = L L^T
  LatentFactor,    ///< h_j = h_target + bias_j for j below the target index
  AugmentedInput   ///< one product kernel over (x, tag_j)
};

std::string to_string(MultiOutputVariant variant);
MultiOutputVariant multi_output_variant_from_string(const std::string& name);

/// Prior over h : X -> R^k. Every output has a constant prior mean built from a
/// small coefficient vector (see mean_design). Output indices are 0-based; for
/// the latent factor model the last output is the target.
class MultiOutputModel {
 public:
  static MultiOutputModel independent(std::vector<Kernel> kernels, Vector means);
  /// `factor` is the lower-triangular L with Sigma = L L^T. The shared kernel's
  /// output scale is ignored (Sigma carries the scale).
  static MultiOutputModel coregionalized(Matrix factor, const Kernel& shared, Vector means);
  /// `biases` holds the k-1 bias kernels Xi_j; `bias_means` their constants nu_j.
  static MultiOutputModel latent_factor(Kernel target, std::vector<Kernel> biases,
                                        double target_mean, Vector bias_means);
  /// `kernel` acts on (x, tag) in d+1 dimensions; `tags` holds one tag per output.
  static MultiOutputModel augmented(Kernel kernel, Vector tags, double mean);

  MultiOutputVariant variant() const { return variant_; }
  int outputs() const { return outputs_; }
  int dim() const { return dim_; }

  double prior_mean(int j) const;
  double prior_cov(ConstPoint x, int j, ConstPoint x2, int j2) const;
  /// Gradient of prior_cov with respect to x.
  Vector prior_cov_grad_first(ConstPoint x, int j, ConstPoint x2, int j2) const;
  Matrix prior_cov_matrix(ConstPoint x, ConstPoint x2) const;

  /// Row of the mean design: prior_mean(j) = mean_design(j) . mean_coefficients().
  Vector mean_design(int j) const;
  const Vector& mean_coefficients() const { return coef_; }
  MultiOutputModel with_mean_coefficients(Vector coef) const;

  /// Covariance hyperparameters in an unconstrained-ish parameterization: log
  /// lengthscales/scales, plus raw off-diagonal and log diagonal entries of L.
  Vector params() const;
  MultiOutputModel with_params(const Vector& theta) const;
  int num_params() const;
  Vector param_grad(ConstPoint x, int j, ConstPoint x2, int j2) const;

  const std::vector<Kernel>& kernels() const { return kernels_; }
  const Matrix& factor() const { return factor_; }
  Matrix sigma() const { return factor_ * factor_.transpose(); }
  const Vector& tags() const { return tags_; }

 private:
  MultiOutputModel() = default;
  Vector augment(ConstPoint x, int j) const;

  MultiOutputVariant variant_ = MultiOutputVariant::Independent;
  int outputs_ = 0;
  int dim_ = 0;
  std::vector<Kernel> kernels_;
  Matrix factor_;
  Vector tags_;
  Vector coef_;
};

/// Observations of single outputs h_j(x_i); rows need not cover all outputs.
struct TaggedDataset {
  PointSet x;                ///< d x n
  std::vector<int> output;   ///< j_i
  Vector y;
  Vector cost;
  Vector noise;              ///< per-output noise variance, size k

  TaggedDataset() = default;
  TaggedDataset(int dim, int outputs, double noise = 0.0);

  int size() const { return static_cast<int>(y.size()); }
  int dim() const { return static_cast<int>(x.rows()); }
  int outputs() const { return static_cast<int>(noise.size()); }
  void add(ConstPoint point, int j, double value, double c = 0.0);
};

struct TaggedPoint {
  Vector x;
  int output = 0;
};

/// Joint posterior of a multi-output model given a TaggedDataset.
class MoGpPosterior {
 public:
  MoGpPosterior(MultiOutputModel model, TaggedDataset data, const JitterPolicy& jitter = {});

  int outputs() const { return model_.outputs(); }
  int dim() const { return model_.dim(); }

  Vector mean(ConstPoint x) const;
  double mean(ConstPoint x, int j) const;
  /// k x d Jacobian of the mean vector.
  Matrix mean_jacobian(ConstPoint x) const;
  Vector mean_grad(ConstPoint x, int j) const;

  double cov(ConstPoint x, int j, ConstPoint x2, int j2) const;
  /// d/dx cov(x, j, x2, j2).
  Vector cov_grad_first(ConstPoint x, int j, ConstPoint x2, int j2) const;
  /// K_n(x, x), symmetrized; outputs whose variance is under the floor get a
  /// zero row and column.
  Matrix cov_matrix(ConstPoint x) const;
  /// K_n(x, x2) without clamping.
  Matrix cross_cov(ConstPoint x, ConstPoint x2) const;
  /// d K_n(x, x) / d x_l for each coordinate l.
  std::vector<Matrix> cov_matrix_grad(ConstPoint x) const;
  Matrix joint_cov(const std::vector<TaggedPoint>& points) const;

  Vector prior_row(ConstPoint x, int j) const;
  Matrix prior_row_jacobian(ConstPoint x, int j) const;
  Vector solve(const Vector& v) const;

  double variance_floor(int j) const;
  double jitter() const { return chol_.jitter; }
  double noise(int j) const { return data_.noise(j); }

  const MultiOutputModel& model() const { return model_; }
  const TaggedDataset& data() const { return data_; }
  /// K^-1 (y - prior mean), the cached solve.
  const Vector& weights() const { return alpha_; }

 private:
  MultiOutputModel model_;
  TaggedDataset data_;
  JitteredCholesky chol_;
  Matrix lower_;
  Vector alpha_;
  double scale_ = 1.0;
};

/// Lower Cholesky factor C_n(x) of K_n(x, x); a zero covariance gives a zero factor.
Matrix cholesky_of_cov(const MoGpPosterior& post, ConstPoint x);

/// Scalar posterior of p^T h. Holds a reference to `post`, which must outlive it.
class LinearFunctionalPosterior final : public ScalarPosterior {
 public:
  LinearFunctionalPosterior(const MoGpPosterior& post, Vector p);

  int dim() const override { return post_->dim(); }
  double mean(ConstPoint x) const override;
  Vector mean_grad(ConstPoint x) const override;
  double cov(ConstPoint x, ConstPoint x2) const override;
  double variance(ConstPoint x) const override;
  Vector variance_grad(ConstPoint x) const override;
  /// Noise of one observation of p^T h with every output observed independently.
  double noise_variance() const override;

  /// The functional q * p^T h.
  LinearFunctionalPosterior scaled(double q) const;
  const Vector& weights() const { return p_; }

 private:
  const MoGpPosterior* post_;
  Vector p_;
};

/// Draws `count` joint samples at the tagged points; column s is one draw.
/// Deterministic given seed; exact mean when the covariance vanishes.
Matrix sample_joint(const MoGpPosterior& post, const std::vector<TaggedPoint>& points, int count,
                    std::uint64_t seed);

struct MoFitOptions {
  MultiOutputVariant variant = MultiOutputVariant::Independent;
  KernelFamily family = KernelFamily::Matern52;
  int restarts = 8;
  std::uint64_t seed = 0;
  bool standardize = true;
  int max_iterations = 200;
  JitterPolicy jitter;
  /// Output tags for the augmented-input variant.
  Vector tags;
  /// Extra start from a previous fit (same variant and shape).
  std::optional<MultiOutputModel> warm_start;
};

struct MoFitResult {
  MultiOutputModel model;
  double log_likelihood = 0.0;
  bool improved = true;
};

/// Maximum-likelihood fit. Independent outputs are fitted one by one with
/// fit_hyperparameters; the coupled variants maximize the joint likelihood with
/// analytic gradients and GLS-profiled mean constants. Noise is taken from data.
MoFitResult fit_multi_output(const TaggedDataset& data, const MoFitOptions& options);

/// Joint log likelihood with the mean coefficients profiled out (exposed for tests).
double mo_profiled_log_likelihood(const MultiOutputModel& shape, const Vector& theta,
                                  const TaggedDataset& data, const JitterPolicy& jitter,
                                  Vector* grad, Vector* coefficients);

}  // namespace greybox
