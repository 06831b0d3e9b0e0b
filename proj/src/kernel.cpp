#include "greybox/kernel.h"

#include <cmath>
#include <stdexcept>

namespace greybox {

namespace {
const double kSqrt5 = std::sqrt(5.0);
}

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential:
      return "se";
    case KernelFamily::Matern52:
      return "matern52";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "se" || name == "squared-exponential") return KernelFamily::SquaredExponential;
  if (name == "matern52" || name == "matern-5/2") return KernelFamily::Matern52;
  throw std::invalid_argument("unknown kernel family '" + name + "'");
}

Kernel::Kernel(KernelFamily family, Vector lengthscales, double output_scale)
    : family_(family), lengthscales_(std::move(lengthscales)), output_scale_(output_scale) {
  if (lengthscales_.size() < 1) throw std::invalid_argument("Kernel: dimension must be >= 1");
  if (!(lengthscales_.array() > 0.0).all() || !lengthscales_.allFinite())
    throw std::invalid_argument("Kernel: lengthscales must be positive and finite");
  if (!(output_scale_ > 0.0) || !std::isfinite(output_scale_))
    throw std::invalid_argument("Kernel: output scale must be positive and finite");
  inv_sq_lengthscales_ = lengthscales_.array().square().inverse();
}

Kernel Kernel::unit(KernelFamily family, int d) { return {family, Vector::Ones(d), 1.0}; }

Kernel Kernel::from_log_params(KernelFamily family, const Vector& theta) {
  const Eigen::Index d = theta.size() - 1;
  return {family, theta.head(d).array().exp().matrix(), std::exp(theta(d))};
}

Vector Kernel::log_params() const {
  Vector theta(num_params());
  theta.head(dim()) = lengthscales_.array().log().matrix();
  theta(dim()) = std::log(output_scale_);
  return theta;
}

Kernel Kernel::scaled(double factor) const { return {family_, lengthscales_, output_scale_ * factor}; }

double Kernel::scaled_sqdist(ConstPoint a, ConstPoint b) const {
  return ((a - b).array().square() * inv_sq_lengthscales_.array()).sum();
}

void Kernel::profile(double r2, double& value, double& slope) const {
  switch (family_) {
    case KernelFamily::SquaredExponential: {
      value = output_scale_ * std::exp(-0.5 * r2);
      slope = -0.5 * value;
      return;
    }
    case KernelFamily::Matern52: {
      const double r = std::sqrt(r2);
      const double e = std::exp(-kSqrt5 * r);
      value = output_scale_ * (1.0 + kSqrt5 * r + 5.0 * r2 / 3.0) * e;
      slope = -(5.0 / 6.0) * output_scale_ * (1.0 + kSqrt5 * r) * e;
      return;
    }
  }
}

double Kernel::operator()(ConstPoint a, ConstPoint b) const {
  double value = 0.0;
  double slope = 0.0;
  profile(scaled_sqdist(a, b), value, slope);
  return value;
}

Vector Kernel::grad_first(ConstPoint a, ConstPoint b) const {
  double value = 0.0;
  double slope = 0.0;
  profile(scaled_sqdist(a, b), value, slope);
  return (2.0 * slope) * ((a - b).array() * inv_sq_lengthscales_.array()).matrix();
}

Vector Kernel::log_param_grad(ConstPoint a, ConstPoint b) const {
  double value = 0.0;
  double slope = 0.0;
  profile(scaled_sqdist(a, b), value, slope);
  Vector g(num_params());
  g.head(dim()) = (-2.0 * slope) * ((a - b).array().square() * inv_sq_lengthscales_.array()).matrix();
  g(dim()) = value;
  return g;
}

}  // namespace greybox
