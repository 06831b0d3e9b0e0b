#pragma once

#include <optional>

#include "greybox/acquisition.h"
#include "greybox/domain.h"
#include "greybox/gp.h"
#include "greybox/mogp.h"
#include "greybox/optimize.h"
#include "greybox/types.h"

namespace greybox {

/// What a knowledge-gradient computation needs from a model: the posterior of
/// the objective at x' and of one fantasized observation at x, both expressed
/// through the prior covariance rows against the conditioning data.
class KgView {
 public:
  virtual ~KgView() = default;
  virtual int dim() const = 0;

  virtual double objective_mean(ConstPoint x) const = 0;
  virtual Vector objective_mean_grad(ConstPoint x) const = 0;
  /// Prior covariance between each datum and the objective at x (n-vector).
  virtual Vector objective_row(ConstPoint x) const = 0;
  virtual Matrix objective_row_jacobian(ConstPoint x) const = 0;
  /// Prior covariance between each datum and the fantasized observation at x.
  virtual Vector fantasy_row(ConstPoint x) const = 0;
  virtual Matrix fantasy_row_jacobian(ConstPoint x) const = 0;
  /// Prior covariance between the objective at xo and the fantasy at xf, and its
  /// gradients in each argument.
  virtual double prior_cross(ConstPoint xo, ConstPoint xf) const = 0;
  virtual Vector prior_cross_grad_objective(ConstPoint xo, ConstPoint xf) const = 0;
  virtual Vector prior_cross_grad_fantasy(ConstPoint xo, ConstPoint xf) const = 0;
  virtual double fantasy_prior_variance(ConstPoint x) const = 0;
  virtual Vector fantasy_prior_variance_grad(ConstPoint x) const = 0;
  virtual double fantasy_noise() const = 0;
  virtual double fantasy_floor() const = 0;
  virtual Vector solve(const Vector& v) const = 0;
};

/// f itself is both objective and fantasy.
class GpKgView final : public KgView {
 public:
  explicit GpKgView(const GpPosterior& gp) : gp_(&gp) {}
  int dim() const override { return gp_->dim(); }
  double objective_mean(ConstPoint x) const override { return gp_->mean(x); }
  Vector objective_mean_grad(ConstPoint x) const override { return gp_->mean_grad(x); }
  Vector objective_row(ConstPoint x) const override { return gp_->prior_row(x); }
  Matrix objective_row_jacobian(ConstPoint x) const override { return gp_->prior_row_jacobian(x); }
  Vector fantasy_row(ConstPoint x) const override { return gp_->prior_row(x); }
  Matrix fantasy_row_jacobian(ConstPoint x) const override { return gp_->prior_row_jacobian(x); }
  double prior_cross(ConstPoint xo, ConstPoint xf) const override;
  Vector prior_cross_grad_objective(ConstPoint xo, ConstPoint xf) const override;
  Vector prior_cross_grad_fantasy(ConstPoint xo, ConstPoint xf) const override;
  double fantasy_prior_variance(ConstPoint x) const override;
  Vector fantasy_prior_variance_grad(ConstPoint x) const override;
  double fantasy_noise() const override { return gp_->noise_variance(); }
  double fantasy_floor() const override { return gp_->variance_floor(); }
  Vector solve(const Vector& v) const override { return gp_->solve(v); }

 private:
  const GpPosterior* gp_;
};

/// Objective p^T h(x') with a fantasized observation of output j at x.
class MoKgView final : public KgView {
 public:
  MoKgView(const MoGpPosterior& post, Vector p, int fantasy_output);
  int dim() const override { return post_->dim(); }
  double objective_mean(ConstPoint x) const override;
  Vector objective_mean_grad(ConstPoint x) const override;
  Vector objective_row(ConstPoint x) const override;
  Matrix objective_row_jacobian(ConstPoint x) const override;
  Vector fantasy_row(ConstPoint x) const override { return post_->prior_row(x, j_); }
  Matrix fantasy_row_jacobian(ConstPoint x) const override { return post_->prior_row_jacobian(x, j_); }
  double prior_cross(ConstPoint xo, ConstPoint xf) const override;
  Vector prior_cross_grad_objective(ConstPoint xo, ConstPoint xf) const override;
  Vector prior_cross_grad_fantasy(ConstPoint xo, ConstPoint xf) const override;
  double fantasy_prior_variance(ConstPoint x) const override;
  Vector fantasy_prior_variance_grad(ConstPoint x) const override;
  double fantasy_noise() const override { return post_->noise(j_); }
  double fantasy_floor() const override { return post_->variance_floor(j_); }
  Vector solve(const Vector& v) const override { return post_->solve(v); }

 private:
  const MoGpPosterior* post_;
  Vector p_;
  int j_;
};

/// E[max_i (a_i + b_i Z)] - max_i a_i for standard normal Z, by the upper
/// envelope of the lines. Optional gradients with respect to a and b.
double envelope_excess(const Vector& a, const Vector& b, Vector* da = nullptr, Vector* db = nullptr);

/// sigma-tilde(x'; x) = K_n(x', x) / sqrt(K_n(x, x) + noise), zero when the
/// denominator vanishes.
double kg_sigma_tilde(const KgView& view, ConstPoint x_prime, ConstPoint x);

/// Discretized KG over a fixed point set with the candidate appended. The
/// expensive per-set work (means, K^-1 rows) is done once at construction.
class DiscretizedKg {
 public:
  DiscretizedKg(const KgView& view, PointSet points);
  /// Exact expectation of the discretized max minus the max posterior mean over
  /// the same set (candidate included). Gradient in x when requested.
  double value(ConstPoint x, Vector* grad = nullptr) const;
  /// Lines (a, b) over points followed by the candidate.
  void lines(ConstPoint x, Vector& a, Vector& b) const;
  const PointSet& points() const { return points_; }
  /// Same point set and objective, different fantasy. `view` must share this
  /// instance's objective and conditioning data.
  DiscretizedKg rebind(const KgView& view) const;

 private:
  const KgView* view_;
  PointSet points_;
  Vector means_;
  Matrix weights_;  ///< K^-1 objective rows, n x m
};

double kg_discretized(const KgView& view, ConstPoint x, const PointSet& points, Vector* grad = nullptr);
double kg_discretized(const GpPosterior& gp, ConstPoint x, const PointSet& points, Vector* grad = nullptr);

/// Fixed draws and inner-max strategy for Monte Carlo KG.
struct KgSamplePlan {
  enum class Strategy { Discretized, OneShot };
  Strategy strategy = Strategy::Discretized;
  Vector z;          ///< standard normal draws, one per sample
  PointSet points;   ///< discretization, or inner-search starts for OneShot
  int inner_iterations = 100;
};

KgSamplePlan make_kg_plan(KgSamplePlan::Strategy strategy, int samples, PointSet points,
                          std::uint64_t seed);

/// Monte Carlo KG: mean over draws of max_x' (mu_n(x') + sigma-tilde(x'; x) Z) minus
/// the baseline max of mu_n computed with the same strategy and points.
Estimate kg_value(const KgView& view, ConstPoint x, const KgSamplePlan& plan, const SearchDomain& domain);

/// Local maximizer of the objective's posterior mean from the given starts.
struct MeanMaximum {
  Vector x;
  double value = 0.0;
};
MeanMaximum maximize_posterior_mean(const KgView& view, const SearchDomain& domain,
                                    const PointSet& starts, int max_iterations = 100);

/// One-shot SAA objective over joint = (x, x'_1, ..., x'_M):
/// (1/M) sum_m [mu(x'_m) + sigma-tilde(x'_m; x) z_m] - baseline.
double one_shot_kg(const KgView& view, const Vector& joint, const Vector& z, double baseline,
                   Vector* grad = nullptr);

/// Maximizes one-shot KG. Fantasy blocks start at the posterior-mean maximizer;
/// `fantasy_restarts` joint starts are used.
OptimizeResult maximize_kg_one_shot(const KgView& view, const SearchDomain& domain, const Vector& z,
                                    const OptimizerConfig& config, int fantasy_restarts = 20);

/// Multi-fidelity KG per unit cost: fantasize fidelity j at x, objective at the target.
Estimate mf_kg_value(const MoGpPosterior& post, int target, const CostModel& cost, ConstPoint x, int j,
                     const KgSamplePlan& plan, const SearchDomain& domain);
/// KG of p^T h from one fantasized constituent j, optionally per unit cost.
Estimate constituent_kg_value(const MoGpPosterior& post, const Vector& p, const CostModel* cost,
                              ConstPoint x, int j, const KgSamplePlan& plan, const SearchDomain& domain);

/// KG for a composite objective g(h(x)): outer fantasies of the full vector h(x)
/// with draws `outer` (k x M) and inner Monte Carlo of g with draws `inner`
/// (k x N), both over the same discretization (candidate appended).
double kgcf_value(const MoGpPosterior& post, const OuterFunction& g, ConstPoint x, const PointSet& points,
                  const Matrix& outer, const Matrix& inner);

}  // namespace greybox
