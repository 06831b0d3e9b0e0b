#pragma once

#include <string>

#include "greybox/types.h"

namespace greybox {

enum class KernelFamily { SquaredExponential, Matern52 };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// Stationary ARD covariance k(a, b) = s * rho(r^2), r^2 = sum_i ((a_i - b_i) / l_i)^2.
/// k(x, x) equals the output scale s for every x.
class Kernel {
 public:
  Kernel(KernelFamily family, Vector lengthscales, double output_scale);

  /// Unit lengthscales and unit output scale.
  static Kernel unit(KernelFamily family, int d);

  /// Builds a kernel from theta = (log l_1, ..., log l_d, log s).
  static Kernel from_log_params(KernelFamily family, const Vector& theta);
  Vector log_params() const;
  int num_params() const { return dim() + 1; }

  double operator()(ConstPoint a, ConstPoint b) const;
  /// Gradient with respect to the first argument.
  Vector grad_first(ConstPoint a, ConstPoint b) const;
  /// Derivatives with respect to log_params().
  Vector log_param_grad(ConstPoint a, ConstPoint b) const;

  KernelFamily family() const { return family_; }
  int dim() const { return static_cast<int>(lengthscales_.size()); }
  const Vector& lengthscales() const { return lengthscales_; }
  double output_scale() const { return output_scale_; }

  Kernel scaled(double factor) const;

 private:
  double scaled_sqdist(ConstPoint a, ConstPoint b) const;
  /// Value and derivative with respect to r^2.
  void profile(double r2, double& value, double& slope) const;

  KernelFamily family_;
  Vector lengthscales_;
  Vector inv_sq_lengthscales_;
  double output_scale_;
};

/// Prior mean: zero or a constant.
class MeanFunction {
 public:
  enum class Form { Zero, Constant };

  static MeanFunction zero() { return MeanFunction(Form::Zero, 0.0); }
  static MeanFunction constant(double c) { return MeanFunction(Form::Constant, c); }

  double operator()(ConstPoint) const { return value_; }
  Form form() const { return form_; }
  double value() const { return value_; }

 private:
  MeanFunction(Form form, double value) : form_(form), value_(value) {}
  Form form_;
  double value_;
};

}  // namespace greybox
