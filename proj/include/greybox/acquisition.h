#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "greybox/gp.h"
#include "greybox/types.h"

namespace greybox {

/// Monte Carlo estimate with its standard error.
struct Estimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Mean and standard error of a sample.
Estimate summarize_sample(const Vector& values);

/// Best objective value seen so far and where it was seen.
struct Incumbent {
  double value = 0.0;
  Vector argbest;
};

/// Largest observed y; empty when there is no data.
std::optional<Incumbent> best_observed(const Dataset& data);
/// Largest posterior mean over the given points (used when observations are
/// noisy, and for noiseless models whose mean interpolates only up to jitter).
Incumbent posterior_incumbent(const ScalarPosterior& post, const PointSet& points);

/// Known outer function g of a composite objective f(x) = g(h(x)), maximized.
class OuterFunction {
 public:
  enum class Tag { Identity, NegativeSumSquares, Sum, User };
  using Fn = std::function<double(const Vector&)>;
  using GradFn = std::function<Vector(const Vector&)>;

  static OuterFunction identity();
  /// g(y) = -||y - y_obs||^2.
  static OuterFunction negative_sum_squares(Vector y_obs);
  static OuterFunction sum(int k);
  static OuterFunction user(int k, Fn fn, GradFn grad);

  double operator()(const Vector& y) const { return fn_(y); }
  Vector grad(const Vector& y) const { return grad_(y); }
  Tag tag() const { return tag_; }
  int outputs() const { return outputs_; }
  const Vector& target() const { return target_; }

 private:
  OuterFunction(Tag tag, int k, Fn fn, GradFn grad, Vector target = {})
      : tag_(tag), outputs_(k), fn_(std::move(fn)), grad_(std::move(grad)), target_(std::move(target)) {}
  Tag tag_;
  int outputs_;
  Fn fn_;
  GradFn grad_;
  Vector target_;
};

/// Evaluation cost c(x, j) for fidelity or constituent j.
class CostModel {
 public:
  using Fn = std::function<double(ConstPoint x, int j)>;

  static CostModel known(Fn fn);
  /// GP on log cost, one per tag; a tag without a model uses `fallback_log`.
  /// Predictions are the posterior median exp(mu_n(x)).
  static CostModel log_gp(std::vector<std::shared_ptr<const GpPosterior>> models, Vector fallback_log);

  double operator()(ConstPoint x, int j) const;
  Vector grad(ConstPoint x, int j) const;
  bool is_known() const { return static_cast<bool>(fn_); }

 private:
  CostModel() = default;
  Fn fn_;
  std::vector<std::shared_ptr<const GpPosterior>> models_;
  Vector fallback_log_;
};

/// Fits the log-cost model from observed (x, j, cost) triples.
CostModel fit_log_cost_model(const PointSet& x, const std::vector<int>& tags, const Vector& cost,
                             int num_tags, std::uint64_t seed);

/// Expected improvement E[(f - best)^+] for f ~ N(best + delta, sigma^2).
double ei_from_moments(double delta, double sigma);
double ei_analytic(const ScalarPosterior& post, const Incumbent& incumbent, ConstPoint x);
/// Exact gradient; throws std::domain_error where the posterior variance is zero.
Vector ei_gradient(const ScalarPosterior& post, const Incumbent& incumbent, ConstPoint x);
/// Value plus gradient for optimizers; the gradient is set to zero where sigma = 0.
double ei_with_gradient(const ScalarPosterior& post, const Incumbent& incumbent, ConstPoint x,
                        Vector* grad);

}  // namespace greybox
