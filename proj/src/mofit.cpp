#include <cmath>
#include <limits>
#include <stdexcept>

#include "greybox/mogp.h"
#include "greybox/optimize.h"
#include "greybox/rng.h"

namespace greybox {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct Standardization {
  Vector shift;  // per output
  Vector scale;  // per output
};

Standardization standardize_outputs(const TaggedDataset& data, bool per_output, bool enabled) {
  const int k = data.outputs();
  Standardization s{Vector::Zero(k), Vector::Ones(k)};
  if (!enabled || data.size() == 0) return s;
  auto stats = [&](auto&& include, double& shift, double& scale) {
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < data.size(); ++i)
      if (include(i)) {
        sum += data.y(i);
        ++count;
      }
    if (count == 0) return;
    shift = sum / count;
    double ss = 0.0;
    for (int i = 0; i < data.size(); ++i)
      if (include(i)) ss += (data.y(i) - shift) * (data.y(i) - shift);
    const double sd = std::sqrt(ss / count);
    scale = sd > 1e-12 * std::max(1.0, std::abs(shift)) ? sd : 1.0;
  };
  if (per_output) {
    for (int j = 0; j < k; ++j) stats([&](int i) { return data.output[i] == j; }, s.shift(j), s.scale(j));
  } else {
    double shift = 0.0;
    double scale = 1.0;
    stats([](int) { return true; }, shift, scale);
    s.shift.setConstant(shift);
    s.scale.setConstant(scale);
  }
  return s;
}

MoFitResult fit_independent(const TaggedDataset& data, const MoFitOptions& options) {
  const int k = data.outputs();
  const int d = data.dim();
  std::vector<Kernel> kernels;
  Vector means(k);
  double total = 0.0;
  bool improved = true;
  for (int j = 0; j < k; ++j) {
    Dataset sub(d, data.noise(j));
    for (int i = 0; i < data.size(); ++i)
      if (data.output[i] == j) sub.add(data.x.col(i), data.y(i));
    if (sub.size() < 2) {
      // Too little data to fit: a moderately smooth prior around the lone value.
      kernels.emplace_back(options.family, Vector::Constant(d, 0.3), 1.0);
      means(j) = sub.size() == 1 ? sub.y(0) : 0.0;
      continue;
    }
    FitOptions fo;
    fo.family = options.family;
    fo.restarts = options.restarts;
    fo.seed = derive_seed(options.seed, static_cast<std::uint64_t>(j));
    fo.noise_variance = data.noise(j);
    fo.standardize = options.standardize;
    fo.max_iterations = options.max_iterations;
    fo.jitter = options.jitter;
    if (options.warm_start && options.warm_start->variant() == MultiOutputVariant::Independent &&
        options.warm_start->outputs() == k)
      fo.warm_start = options.warm_start->kernels()[j];
    const FitResult r = fit_hyperparameters(sub, fo);
    kernels.push_back(r.kernel);
    means(j) = r.mean.value();
    total += r.log_likelihood;
    improved = improved && r.improved;
  }
  return {MultiOutputModel::independent(std::move(kernels), means), total, improved};
}

MultiOutputModel coupled_shape(const TaggedDataset& data, const MoFitOptions& options) {
  const int k = data.outputs();
  const int d = data.dim();
  switch (options.variant) {
    case MultiOutputVariant::Coregionalized:
      return MultiOutputModel::coregionalized(Matrix::Identity(k, k), Kernel::unit(options.family, d),
                                              Vector::Zero(k));
    case MultiOutputVariant::LatentFactor: {
      if (k < 2) throw std::invalid_argument("latent factor model needs at least 2 outputs");
      std::vector<Kernel> biases(k - 1, Kernel::unit(options.family, d));
      return MultiOutputModel::latent_factor(Kernel::unit(options.family, d), std::move(biases), 0.0,
                                             Vector::Zero(k - 1));
    }
    case MultiOutputVariant::AugmentedInput:
      if (options.tags.size() != k) throw std::invalid_argument("augmented model needs one tag per output");
      return MultiOutputModel::augmented(Kernel::unit(options.family, d + 1), options.tags, 0.0);
    case MultiOutputVariant::Independent:
      break;
  }
  throw std::logic_error("coupled_shape: independent variant");
}

struct ParamBox {
  Vector lower, upper, start_lo, start_hi;
  void resize(int p) {
    lower.resize(p);
    upper.resize(p);
    start_lo.resize(p);
    start_hi.resize(p);
  }
  void set(int i, double lo, double hi, double slo, double shi) {
    lower(i) = lo;
    upper(i) = hi;
    start_lo(i) = slo;
    start_hi(i) = shi;
  }
};

// Boxes for one kernel's (log l, log s) block.
void kernel_box(ParamBox& box, int offset, const Vector& spread, double scale_lo, double scale_hi) {
  for (Eigen::Index i = 0; i < spread.size(); ++i)
    box.set(offset + static_cast<int>(i), std::log(1e-3 * spread(i)), std::log(1e3 * spread(i)),
            std::log(0.05 * spread(i)), std::log(2.0 * spread(i)));
  box.set(offset + static_cast<int>(spread.size()), std::log(1e-3), std::log(1e3), std::log(scale_lo),
          std::log(scale_hi));
}

ParamBox parameter_box(const MultiOutputModel& shape, const TaggedDataset& data) {
  const int d = data.dim();
  const int k = data.outputs();
  Vector spread = Vector::Ones(d);
  if (data.size() > 0)
    for (int i = 0; i < d; ++i) {
      const double r = data.x.row(i).maxCoeff() - data.x.row(i).minCoeff();
      spread(i) = r > 0.0 ? r : 1.0;
    }
  ParamBox box;
  box.resize(shape.num_params());
  switch (shape.variant()) {
    case MultiOutputVariant::Coregionalized: {
      for (int i = 0; i < d; ++i)
        box.set(i, std::log(1e-3 * spread(i)), std::log(1e3 * spread(i)), std::log(0.05 * spread(i)),
                std::log(2.0 * spread(i)));
      int p = d;
      for (int a = 0; a < k; ++a)
        for (int b = 0; b <= a; ++b, ++p) {
          if (a == b)
            box.set(p, std::log(1e-4), std::log(1e2), std::log(0.3), std::log(3.0));
          else
            box.set(p, -1e2, 1e2, -1.0, 1.0);
        }
      break;
    }
    case MultiOutputVariant::LatentFactor:
      kernel_box(box, 0, spread, 0.1, 10.0);
      for (int j = 1; j < k; ++j) kernel_box(box, j * (d + 1), spread, 0.01, 1.0);
      break;
    case MultiOutputVariant::AugmentedInput: {
      Vector aug(d + 1);
      aug.head(d) = spread;
      const double tr = shape.tags().maxCoeff() - shape.tags().minCoeff();
      aug(d) = tr > 0.0 ? tr : 1.0;
      kernel_box(box, 0, aug, 0.1, 10.0);
      break;
    }
    case MultiOutputVariant::Independent:
      break;
  }
  return box;
}

// Maps covariance parameters between data units and standardized units.
// `factor` is 1/scale to standardize and scale to restore.
Vector rescale_params(const MultiOutputModel& shape, Vector theta, const Vector& factor) {
  const int d = shape.dim();
  const int k = shape.outputs();
  switch (shape.variant()) {
    case MultiOutputVariant::Coregionalized: {
      int p = d;
      for (int a = 0; a < k; ++a)
        for (int b = 0; b <= a; ++b, ++p) {
          if (a == b)
            theta(p) += std::log(factor(a));
          else
            theta(p) *= factor(a);
        }
      break;
    }
    case MultiOutputVariant::LatentFactor:
      for (int j = 0; j < k; ++j) theta(j * (d + 1) + d) += 2.0 * std::log(factor(0));
      break;
    case MultiOutputVariant::AugmentedInput:
      theta(d + 1) += 2.0 * std::log(factor(0));
      break;
    case MultiOutputVariant::Independent:
      break;
  }
  return theta;
}

}  // namespace

double mo_profiled_log_likelihood(const MultiOutputModel& shape, const Vector& theta,
                                  const TaggedDataset& data, const JitterPolicy& jitter,
                                  Vector* grad, Vector* coefficients) {
  const int n = data.size();
  if (n == 0) throw std::invalid_argument("mo_profiled_log_likelihood: empty dataset");
  const MultiOutputModel model = shape.with_params(theta);
  Matrix gram(n, n);
  for (int c = 0; c < n; ++c)
    for (int r = c; r < n; ++r) {
      gram(r, c) = model.prior_cov(data.x.col(r), data.output[r], data.x.col(c), data.output[c]);
      gram(c, r) = gram(r, c);
    }
  const double scale = gram.diagonal().mean();
  for (int i = 0; i < n; ++i) gram(i, i) += data.noise(data.output[i]);
  const JitteredCholesky chol = jittered_cholesky(gram, scale, jitter);

  const int q = static_cast<int>(model.mean_coefficients().size());
  Matrix design(n, q);
  for (int i = 0; i < n; ++i) design.row(i) = model.mean_design(data.output[i]).transpose();
  const Matrix kd = chol.llt.solve(design);
  Matrix normal = design.transpose() * kd;
  for (int c = 0; c < q; ++c)
    if (design.col(c).squaredNorm() == 0.0) normal(c, c) = 1.0;  // unobserved output: constant 0
  const Vector coef = normal.ldlt().solve(kd.transpose() * data.y);
  if (coefficients != nullptr) *coefficients = coef;

  const Vector residual = data.y - design * coef;
  const Vector alpha = chol.llt.solve(residual);
  const Matrix lower = chol.llt.matrixL();
  const double value = -0.5 * residual.dot(alpha) - lower.diagonal().array().log().sum() -
                       0.5 * n * kLog2Pi;
  if (grad != nullptr) {
    const Matrix w = alpha * alpha.transpose() - chol.llt.solve(Matrix::Identity(n, n));
    grad->setZero(theta.size());
    for (int c = 0; c < n; ++c)
      for (int r = c; r < n; ++r) {
        const double weight = (r == c ? 0.5 : 1.0) * w(r, c);
        *grad += weight * model.param_grad(data.x.col(r), data.output[r], data.x.col(c), data.output[c]);
      }
  }
  return value;
}

MoFitResult fit_multi_output(const TaggedDataset& data, const MoFitOptions& options) {
  if (options.variant == MultiOutputVariant::Independent) return fit_independent(data, options);
  if (data.size() < 2) throw std::invalid_argument("fit_multi_output: need at least 2 records");

  const int k = data.outputs();
  const bool per_output = options.variant == MultiOutputVariant::Coregionalized;
  const Standardization st = standardize_outputs(data, per_output, options.standardize);
  TaggedDataset work = data;
  for (int i = 0; i < data.size(); ++i) {
    const int j = data.output[i];
    work.y(i) = (data.y(i) - st.shift(j)) / st.scale(j);
  }
  for (int j = 0; j < k; ++j) work.noise(j) = data.noise(j) / (st.scale(j) * st.scale(j));

  const MultiOutputModel shape = coupled_shape(data, options);
  const ParamBox box = parameter_box(shape, data);
  const int p = shape.num_params();

  std::vector<Vector> starts;
  const PointSet unit = scrambled_halton(options.restarts, p, options.seed);
  for (int r = 0; r < unit.cols(); ++r)
    starts.push_back((box.start_lo.array() + unit.col(r).array() * (box.start_hi - box.start_lo).array()).matrix());
  if (options.warm_start && options.warm_start->variant() == options.variant &&
      options.warm_start->num_params() == p && options.warm_start->outputs() == k) {
    const Vector theta = rescale_params(shape, options.warm_start->params(), st.scale.cwiseInverse());
    starts.push_back(theta.cwiseMax(box.lower).cwiseMin(box.upper));
  }

  const Objective objective = [&](const Vector& theta, Vector* grad) {
    try {
      return mo_profiled_log_likelihood(shape, theta, work, options.jitter, grad, nullptr);
    } catch (const FactorizationError&) {
      if (grad != nullptr) grad->setZero(theta.size());
      return -std::numeric_limits<double>::infinity();
    }
  };
  LocalSearchOptions local;
  local.max_iterations = options.max_iterations;
  local.gradient_tolerance = 1e-6;
  local.initial_step = 1.0;
  const int count = static_cast<int>(starts.size());
  std::vector<LocalSearchResult> results(count);
  std::vector<double> start_values(count);
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < count; ++r) {
    start_values[r] = objective(starts[r].cwiseMax(box.lower).cwiseMin(box.upper), nullptr);
    results[r] = maximize_box_lbfgs(objective, box.lower, box.upper, starts[r], local);
  }
  int best = -1;
  bool improved = false;
  for (int r = 0; r < count; ++r) {
    if (!std::isfinite(results[r].value)) continue;
    if (best < 0 || results[r].value > results[best].value) best = r;
    if (results[r].value > start_values[r] + 1e-10 * std::max(1.0, std::abs(start_values[r])))
      improved = true;
  }
  if (best < 0) throw FactorizationError("fit_multi_output: no start point was factorizable");

  Vector coef;
  mo_profiled_log_likelihood(shape, results[best].x, work, options.jitter, nullptr, &coef);
  const Vector theta = rescale_params(shape, results[best].x, st.scale);
  MultiOutputModel fitted = shape.with_params(theta);
  Vector data_coef(coef.size());
  switch (options.variant) {
    case MultiOutputVariant::Coregionalized:
      for (int j = 0; j < k; ++j) data_coef(j) = st.shift(j) + st.scale(j) * coef(j);
      break;
    case MultiOutputVariant::LatentFactor:
      data_coef = st.scale(0) * coef;
      data_coef(k - 1) += st.shift(0);
      break;
    default:
      data_coef(0) = st.shift(0) + st.scale(0) * coef(0);
      break;
  }
  double log_scale = 0.0;
  for (int i = 0; i < data.size(); ++i) log_scale += std::log(st.scale(data.output[i]));
  return {fitted.with_mean_coefficients(data_coef), results[best].value - log_scale, improved};
}

}  // namespace greybox
