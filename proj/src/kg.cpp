#include "greybox/kg.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "greybox/normal.h"
#include "greybox/rng.h"

namespace greybox {

double GpKgView::prior_cross(ConstPoint xo, ConstPoint xf) const { return gp_->kernel()(xo, xf); }

Vector GpKgView::prior_cross_grad_objective(ConstPoint xo, ConstPoint xf) const {
  return gp_->kernel().grad_first(xo, xf);
}

Vector GpKgView::prior_cross_grad_fantasy(ConstPoint xo, ConstPoint xf) const {
  return gp_->kernel().grad_first(xf, xo);
}

double GpKgView::fantasy_prior_variance(ConstPoint x) const { return gp_->kernel()(x, x); }

Vector GpKgView::fantasy_prior_variance_grad(ConstPoint x) const { return Vector::Zero(x.size()); }

MoKgView::MoKgView(const MoGpPosterior& post, Vector p, int fantasy_output)
    : post_(&post), p_(std::move(p)), j_(fantasy_output) {
  if (p_.size() != post.outputs()) throw std::invalid_argument("MoKgView: weight size mismatch");
  if (j_ < 0 || j_ >= post.outputs()) throw std::invalid_argument("MoKgView: fantasy output out of range");
}

double MoKgView::objective_mean(ConstPoint x) const {
  double m = 0.0;
  for (int c = 0; c < post_->outputs(); ++c) m += p_(c) * post_->model().prior_mean(c);
  if (post_->data().size() > 0) m += objective_row(x).dot(post_->weights());
  return m;
}

Vector MoKgView::objective_mean_grad(ConstPoint x) const {
  if (post_->data().size() == 0) return Vector::Zero(dim());
  return objective_row_jacobian(x).transpose() * post_->weights();
}

Vector MoKgView::objective_row(ConstPoint x) const {
  Vector row = Vector::Zero(post_->data().size());
  for (int c = 0; c < post_->outputs(); ++c)
    if (p_(c) != 0.0) row += p_(c) * post_->prior_row(x, c);
  return row;
}

Matrix MoKgView::objective_row_jacobian(ConstPoint x) const {
  Matrix jac = Matrix::Zero(post_->data().size(), dim());
  for (int c = 0; c < post_->outputs(); ++c)
    if (p_(c) != 0.0) jac += p_(c) * post_->prior_row_jacobian(x, c);
  return jac;
}

double MoKgView::prior_cross(ConstPoint xo, ConstPoint xf) const {
  double v = 0.0;
  for (int c = 0; c < post_->outputs(); ++c)
    if (p_(c) != 0.0) v += p_(c) * post_->model().prior_cov(xo, c, xf, j_);
  return v;
}

Vector MoKgView::prior_cross_grad_objective(ConstPoint xo, ConstPoint xf) const {
  Vector g = Vector::Zero(dim());
  for (int c = 0; c < post_->outputs(); ++c)
    if (p_(c) != 0.0) g += p_(c) * post_->model().prior_cov_grad_first(xo, c, xf, j_);
  return g;
}

Vector MoKgView::prior_cross_grad_fantasy(ConstPoint xo, ConstPoint xf) const {
  Vector g = Vector::Zero(dim());
  for (int c = 0; c < post_->outputs(); ++c)
    if (p_(c) != 0.0) g += p_(c) * post_->model().prior_cov_grad_first(xf, j_, xo, c);
  return g;
}

double MoKgView::fantasy_prior_variance(ConstPoint x) const {
  return post_->model().prior_cov(x, j_, x, j_);
}

Vector MoKgView::fantasy_prior_variance_grad(ConstPoint x) const {
  return 2.0 * post_->model().prior_cov_grad_first(x, j_, x, j_);
}

double envelope_excess(const Vector& a, const Vector& b, Vector* da, Vector* db) {
  const Eigen::Index m = a.size();
  if (m == 0 || b.size() != m) throw std::invalid_argument("envelope_excess: need matching nonempty a, b");
  std::vector<Eigen::Index> order(m);
  std::iota(order.begin(), order.end(), 0);
  // Slope ascending; among equal slopes the largest intercept (then lowest index) comes last.
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    if (b(i) != b(j)) return b(i) < b(j);
    if (a(i) != a(j)) return a(i) < a(j);
    return i > j;
  });
  std::vector<Eigen::Index> lines;
  std::vector<double> breaks;  // breaks[k]: where lines[k] takes over
  for (std::size_t t = 0; t < order.size(); ++t) {
    const Eigen::Index i = order[t];
    if (t + 1 < order.size() && b(order[t + 1]) == b(i)) continue;
    double z = -std::numeric_limits<double>::infinity();
    while (!lines.empty()) {
      const Eigen::Index j = lines.back();
      z = (a(j) - a(i)) / (b(i) - b(j));
      if (z <= breaks.back()) {
        lines.pop_back();
        breaks.pop_back();
        z = -std::numeric_limits<double>::infinity();
        continue;
      }
      break;
    }
    lines.push_back(i);
    breaks.push_back(z);
  }

  double value = 0.0;
  for (std::size_t k = 1; k < lines.size(); ++k)
    value += (b(lines[k]) - b(lines[k - 1])) * normal_excess(-std::abs(breaks[k]));

  if (da != nullptr || db != nullptr) {
    Vector ga = Vector::Zero(m);
    Vector gb = Vector::Zero(m);
    for (std::size_t k = 0; k < lines.size(); ++k) {
      const double lo = breaks[k];
      const double hi = k + 1 < lines.size() ? breaks[k + 1] : std::numeric_limits<double>::infinity();
      const double cdf_lo = std::isinf(lo) ? 0.0 : normal_cdf(lo);
      const double cdf_hi = std::isinf(hi) ? 1.0 : normal_cdf(hi);
      const double pdf_lo = std::isinf(lo) ? 0.0 : normal_pdf(lo);
      const double pdf_hi = std::isinf(hi) ? 0.0 : normal_pdf(hi);
      ga(lines[k]) = cdf_hi - cdf_lo;
      gb(lines[k]) = pdf_lo - pdf_hi;
    }
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < m; ++i)
      if (a(i) > a(best)) best = i;
    ga(best) -= 1.0;
    if (da != nullptr) *da = std::move(ga);
    if (db != nullptr) *db = std::move(gb);
  }
  return value;
}

namespace {

// Posterior quantities of the fantasized observation at x.
struct FantasyState {
  Vector row;       // prior row f
  Vector u;         // K^-1 f
  double variance;  // clamped K_n(x, x)
  double s;         // variance + noise
  double inv_sqrt;  // 1/sqrt(s), 0 when s = 0
};

FantasyState fantasy_state(const KgView& view, ConstPoint x) {
  FantasyState st;
  st.row = view.fantasy_row(x);
  st.u = view.solve(st.row);
  const double v = view.fantasy_prior_variance(x) - st.row.dot(st.u);
  st.variance = v > view.fantasy_floor() ? v : 0.0;
  st.s = st.variance + view.fantasy_noise();
  st.inv_sqrt = st.s > 0.0 ? 1.0 / std::sqrt(st.s) : 0.0;
  return st;
}

// d s / dx (zero when the variance is clamped).
Vector fantasy_variance_grad(const KgView& view, ConstPoint x, const FantasyState& st, const Matrix& jf) {
  if (st.variance <= 0.0) return Vector::Zero(x.size());
  return view.fantasy_prior_variance_grad(x) - 2.0 * jf.transpose() * st.u;
}

}  // namespace

double kg_sigma_tilde(const KgView& view, ConstPoint x_prime, ConstPoint x) {
  const FantasyState st = fantasy_state(view, x);
  if (st.inv_sqrt == 0.0) return 0.0;
  return (view.prior_cross(x_prime, x) - view.objective_row(x_prime).dot(st.u)) * st.inv_sqrt;
}

DiscretizedKg::DiscretizedKg(const KgView& view, PointSet points) : view_(&view), points_(std::move(points)) {
  const Eigen::Index m = points_.cols();
  means_.resize(m);
  Vector first = m > 0 ? view.objective_row(points_.col(0)) : Vector();
  weights_.resize(first.size(), m);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < m; ++i) {
    means_(i) = view.objective_mean(points_.col(i));
    weights_.col(i) = view.solve(view.objective_row(points_.col(i)));
  }
}

DiscretizedKg DiscretizedKg::rebind(const KgView& view) const {
  DiscretizedKg out = *this;
  out.view_ = &view;
  return out;
}

void DiscretizedKg::lines(ConstPoint x, Vector& a, Vector& b) const {
  const Eigen::Index m = points_.cols();
  const FantasyState st = fantasy_state(*view_, x);
  a.resize(m + 1);
  b.resize(m + 1);
  a.head(m) = means_;
  a(m) = view_->objective_mean(x);
  if (st.inv_sqrt == 0.0) {
    b.setZero();
    return;
  }
  const Vector wf = weights_.transpose() * st.row;
  for (Eigen::Index i = 0; i < m; ++i) b(i) = (view_->prior_cross(points_.col(i), x) - wf(i)) * st.inv_sqrt;
  b(m) = (view_->prior_cross(x, x) - view_->objective_row(x).dot(st.u)) * st.inv_sqrt;
}

double DiscretizedKg::value(ConstPoint x, Vector* grad) const {
  const Eigen::Index m = points_.cols();
  const FantasyState st = fantasy_state(*view_, x);
  Vector a(m + 1);
  Vector b(m + 1);
  a.head(m) = means_;
  a(m) = view_->objective_mean(x);
  if (st.inv_sqrt == 0.0) {
    // No information: every line is flat and the excess is zero.
    if (grad != nullptr) grad->setZero(x.size());
    return 0.0;
  }
  const Vector wf = weights_.transpose() * st.row;
  for (Eigen::Index i = 0; i < m; ++i) b(i) = (view_->prior_cross(points_.col(i), x) - wf(i)) * st.inv_sqrt;
  const Vector o = view_->objective_row(x);
  b(m) = (view_->prior_cross(x, x) - o.dot(st.u)) * st.inv_sqrt;

  if (grad == nullptr) return envelope_excess(a, b);
  Vector da;
  Vector db;
  const double value = envelope_excess(a, b, &da, &db);

  const Matrix jf = view_->fantasy_row_jacobian(x);
  const Vector ds = fantasy_variance_grad(*view_, x, st, jf);
  const double half_inv_s = 0.5 / st.s;
  Vector g = Vector::Zero(x.size());
  Vector weighted = Vector::Zero(m);
  double slope_sum = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (db(i) == 0.0) continue;
    g += db(i) * st.inv_sqrt * view_->prior_cross_grad_fantasy(points_.col(i), x);
    weighted(i) = db(i) * st.inv_sqrt;
    slope_sum += db(i) * b(i);
  }
  if (weighted.size() > 0 && jf.rows() > 0) g -= jf.transpose() * (weights_ * weighted);
  // Candidate line: both arguments of the cross covariance move with x.
  Vector dnum = view_->prior_cross_grad_objective(x, x) + view_->prior_cross_grad_fantasy(x, x);
  if (jf.rows() > 0)
    dnum -= view_->objective_row_jacobian(x).transpose() * st.u + jf.transpose() * view_->solve(o);
  g += db(m) * st.inv_sqrt * dnum;
  slope_sum += db(m) * b(m);
  g -= slope_sum * half_inv_s * ds;
  g += da(m) * view_->objective_mean_grad(x);
  *grad = std::move(g);
  return value;
}

double kg_discretized(const KgView& view, ConstPoint x, const PointSet& points, Vector* grad) {
  return DiscretizedKg(view, points).value(x, grad);
}

double kg_discretized(const GpPosterior& gp, ConstPoint x, const PointSet& points, Vector* grad) {
  const GpKgView view(gp);
  return kg_discretized(view, x, points, grad);
}

KgSamplePlan make_kg_plan(KgSamplePlan::Strategy strategy, int samples, PointSet points,
                          std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("KG plan needs at least one sample");
  KgSamplePlan plan;
  plan.strategy = strategy;
  CounterRng rng(seed, 0x4b47);
  plan.z = rng.normal_vector(samples);
  plan.points = std::move(points);
  return plan;
}

MeanMaximum maximize_posterior_mean(const KgView& view, const SearchDomain& domain,
                                    const PointSet& starts, int max_iterations) {
  if (starts.cols() == 0) throw std::invalid_argument("maximize_posterior_mean: no starts");
  Vector values(starts.cols());
  for (Eigen::Index i = 0; i < starts.cols(); ++i) values(i) = view.objective_mean(starts.col(i));
  std::vector<Eigen::Index> order(starts.cols());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return values(i) > values(j); });
  const Objective mean = [&](const Vector& x, Vector* grad) {
    if (grad != nullptr) *grad = view.objective_mean_grad(x);
    return view.objective_mean(x);
  };
  LocalSearchOptions options;
  options.max_iterations = max_iterations;
  options.initial_step = 0.1 * (domain.upper() - domain.lower()).maxCoeff();
  MeanMaximum best{starts.col(order[0]), values(order[0])};
  const std::size_t tries = std::min<std::size_t>(3, order.size());
  for (std::size_t t = 0; t < tries; ++t) {
    const LocalSearchResult r =
        maximize_box_lbfgs(mean, domain.lower(), domain.upper(), starts.col(order[t]), options);
    if (r.value > best.value) best = {r.x, r.value};
  }
  return best;
}

namespace {

// max over x' of mu(x') + sigma-tilde(x'; x) z by local search from the best starts.
double inner_max(const KgView& view, const SearchDomain& domain, const FantasyState& st, ConstPoint x,
                 double z, const PointSet& starts, int max_iterations) {
  const Objective fn = [&](const Vector& xp, Vector* grad) {
    const Vector o = view.objective_row(xp);
    const double sig = (view.prior_cross(xp, x) - o.dot(st.u)) * st.inv_sqrt;
    if (grad != nullptr) {
      Vector ds = view.prior_cross_grad_objective(xp, x);
      if (o.size() > 0) ds -= view.objective_row_jacobian(xp).transpose() * st.u;
      *grad = view.objective_mean_grad(xp) + z * st.inv_sqrt * ds;
    }
    return view.objective_mean(xp) + sig * z;
  };
  Vector values(starts.cols());
  for (Eigen::Index i = 0; i < starts.cols(); ++i) values(i) = fn(starts.col(i), nullptr);
  std::vector<Eigen::Index> order(starts.cols());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return values(i) > values(j); });
  LocalSearchOptions options;
  options.max_iterations = max_iterations;
  options.initial_step = 0.1 * (domain.upper() - domain.lower()).maxCoeff();
  double best = values(order[0]);
  const std::size_t tries = std::min<std::size_t>(3, order.size());
  for (std::size_t t = 0; t < tries; ++t)
    best = std::max(best, maximize_box_lbfgs(fn, domain.lower(), domain.upper(), starts.col(order[t]), options).value);
  return best;
}

}  // namespace

Estimate kg_value(const KgView& view, ConstPoint x, const KgSamplePlan& plan, const SearchDomain& domain) {
  const Eigen::Index m = plan.z.size();
  if (m < 1) throw std::invalid_argument("kg_value: plan has no draws");
  Vector samples(m);
  if (plan.strategy == KgSamplePlan::Strategy::Discretized) {
    if (plan.points.cols() < 1 && plan.points.rows() == 0) throw std::invalid_argument("kg_value: empty point set");
    Vector a;
    Vector b;
    DiscretizedKg(view, plan.points).lines(x, a, b);
    const double base = a.maxCoeff();
    for (Eigen::Index s = 0; s < m; ++s) samples(s) = (a + b * plan.z(s)).maxCoeff() - base;
    return summarize_sample(samples);
  }
  const MeanMaximum base = maximize_posterior_mean(view, domain, plan.points, plan.inner_iterations);
  PointSet starts(plan.points.rows(), plan.points.cols() + 2);
  starts << plan.points, base.x, x;
  const FantasyState st = fantasy_state(view, x);
  if (st.inv_sqrt == 0.0) return {0.0, 0.0};
#pragma omp parallel for schedule(dynamic, 1)
  for (Eigen::Index s = 0; s < m; ++s)
    samples(s) = inner_max(view, domain, st, x, plan.z(s), starts, plan.inner_iterations) - base.value;
  return summarize_sample(samples);
}

double one_shot_kg(const KgView& view, const Vector& joint, const Vector& z, double baseline, Vector* grad) {
  const int d = view.dim();
  const Eigen::Index m = z.size();
  if (joint.size() != d * (m + 1)) throw std::invalid_argument("one_shot_kg: joint vector size mismatch");
  const Vector x = joint.head(d);
  const FantasyState st = fantasy_state(view, x);
  Matrix jf;
  Vector ds;
  if (grad != nullptr) {
    grad->setZero(joint.size());
    jf = view.fantasy_row_jacobian(x);
    ds = fantasy_variance_grad(view, x, st, jf);
  }
  double total = 0.0;
  for (Eigen::Index s = 0; s < m; ++s) {
    const auto xp = joint.segment(d * (s + 1), d);
    const Vector o = view.objective_row(xp);
    const double sig = (view.prior_cross(xp, x) - o.dot(st.u)) * st.inv_sqrt;
    total += view.objective_mean(xp) + sig * z(s);
    if (grad == nullptr) continue;
    Vector gp = view.objective_mean_grad(xp);
    if (st.inv_sqrt > 0.0) {
      Vector dxp = view.prior_cross_grad_objective(xp, x);
      Vector dx = view.prior_cross_grad_fantasy(xp, x);
      if (o.size() > 0) {
        dxp -= view.objective_row_jacobian(xp).transpose() * st.u;
        dx -= jf.transpose() * view.solve(o);
      }
      gp += z(s) * st.inv_sqrt * dxp;
      grad->head(d) += z(s) * (st.inv_sqrt * dx - sig * (0.5 / st.s) * ds);
    }
    grad->segment(d * (s + 1), d) += gp;
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  if (grad != nullptr) *grad *= inv_m;
  return total * inv_m - baseline;
}

OptimizeResult maximize_kg_one_shot(const KgView& view, const SearchDomain& domain, const Vector& z,
                                    const OptimizerConfig& config, int fantasy_restarts) {
  const int d = domain.dim();
  const Eigen::Index m = z.size();
  const long long dimension = static_cast<long long>(d) * (m + 1);
  if (dimension > config.max_one_shot_dimension)
    throw std::length_error("one-shot problem dimension " + std::to_string(dimension) + " exceeds cap " +
                            std::to_string(config.max_one_shot_dimension) + "; reduce the number of samples");
  PointSet unit = scrambled_halton(std::max(config.restarts, 1), d, config.seed);
  PointSet starts(d, unit.cols());
  for (Eigen::Index i = 0; i < unit.cols(); ++i) starts.col(i) = domain.from_unit(unit.col(i));
  const MeanMaximum base = maximize_posterior_mean(view, domain, starts);
  const PointSet cand = scrambled_halton(fantasy_restarts, d, derive_seed(config.seed, 0x05));
  std::vector<Vector> joint_starts;
  for (Eigen::Index r = 0; r < cand.cols(); ++r) {
    Vector j(dimension);
    j.head(d) = domain.from_unit(cand.col(r));
    for (Eigen::Index s = 0; s < m; ++s) j.segment(d * (s + 1), d) = base.x;
    joint_starts.push_back(std::move(j));
  }
  const Objective objective = [&](const Vector& joint, Vector* grad) {
    return one_shot_kg(view, joint, z, base.value, grad);
  };
  return maximize_one_shot(objective, domain, static_cast<int>(m), config, joint_starts);
}

Estimate mf_kg_value(const MoGpPosterior& post, int target, const CostModel& cost, ConstPoint x, int j,
                     const KgSamplePlan& plan, const SearchDomain& domain) {
  const MoKgView view(post, Vector::Unit(post.outputs(), target), j);
  const double c = cost(x, j);
  const Estimate e = kg_value(view, x, plan, domain);
  return {e.mean / c, e.standard_error / c};
}

Estimate constituent_kg_value(const MoGpPosterior& post, const Vector& p, const CostModel* cost,
                              ConstPoint x, int j, const KgSamplePlan& plan, const SearchDomain& domain) {
  const MoKgView view(post, p, j);
  const Estimate e = kg_value(view, x, plan, domain);
  if (cost == nullptr) return e;
  const double c = (*cost)(x, j);
  return {e.mean / c, e.standard_error / c};
}

namespace {

// Solves L y = r by forward substitution, setting components with a zero pivot to zero.
Matrix forward_solve_psd(const Matrix& l, const Matrix& r) {
  Matrix y = Matrix::Zero(r.rows(), r.cols());
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (l(i, i) <= 0.0) continue;
    y.row(i) = (r.row(i) - l.row(i).head(i) * y.topRows(i)) / l(i, i);
  }
  return y;
}

// Lower factor of a covariance that should be PSD; rounding-level negative
// eigenvalues are clipped instead of rejected.
Matrix safe_factor(const Matrix& cov) {
  const Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Matrix psd =
      eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() * eig.eigenvectors().transpose();
  return lower_cholesky_psd(psd, 1e-12 * std::max(1.0, psd.diagonal().maxCoeff()));
}

double inner_average(const OuterFunction& g, const Vector& mean, const Matrix& chol, const Matrix& inner) {
  double total = 0.0;
  for (Eigen::Index s = 0; s < inner.cols(); ++s) total += g(mean + chol * inner.col(s));
  return total / static_cast<double>(inner.cols());
}

}  // namespace

double kgcf_value(const MoGpPosterior& post, const OuterFunction& g, ConstPoint x, const PointSet& points,
                  const Matrix& outer, const Matrix& inner) {
  const int k = post.outputs();
  if (outer.rows() != k || inner.rows() != k) throw std::invalid_argument("kgcf_value: draws must be k-vectors");
  const Eigen::Index m = points.cols() + 1;
  Matrix kxx = post.cov_matrix(x);
  for (int j = 0; j < k; ++j) kxx(j, j) += post.noise(j);
  double tol = 0.0;
  for (int j = 0; j < k; ++j) tol = std::max(tol, post.variance_floor(j));
  const Matrix lxx = safe_factor(kxx);

  Vector baseline_values(m);
  std::vector<Vector> means(m);
  std::vector<Matrix> shifts(m);   // B = K_n(x', x) L^-T
  std::vector<Matrix> chols(m);    // factor of the post-fantasy covariance at x'
#pragma omp parallel for schedule(dynamic, 4)
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector xp = i < m - 1 ? Vector(points.col(i)) : Vector(x);
    means[i] = post.mean(xp);
    const Matrix cov = post.cov_matrix(xp);
    baseline_values(i) = inner_average(g, means[i], safe_factor(cov), inner);
    shifts[i] = forward_solve_psd(lxx, post.cross_cov(x, xp)).transpose();
    Matrix after = cov - shifts[i] * shifts[i].transpose();
    for (int j = 0; j < k; ++j)
      if (after(j, j) <= tol) {
        after.row(j).setZero();
        after.col(j).setZero();
      }
    chols[i] = safe_factor(after);
  }
  const double baseline = baseline_values.maxCoeff();
  double total = 0.0;
  for (Eigen::Index s = 0; s < outer.cols(); ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i)
      best = std::max(best, inner_average(g, means[i] + shifts[i] * outer.col(s), chols[i], inner));
    total += best;
  }
  return total / static_cast<double>(outer.cols()) - baseline;
}

}  // namespace greybox
