#include "greybox/optimize.h"

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

namespace greybox {

namespace {

struct CurvaturePair {
  Vector s;
  Vector y;
  double rho;
};

// Two-loop recursion: approximates H * q for the inverse Hessian H of the
// minimization objective.
Vector two_loop(const std::deque<CurvaturePair>& pairs, Vector q) {
  std::vector<double> alpha(pairs.size());
  for (std::size_t k = pairs.size(); k-- > 0;) {
    alpha[k] = pairs[k].rho * pairs[k].s.dot(q);
    q -= alpha[k] * pairs[k].y;
  }
  const CurvaturePair& last = pairs.back();
  q *= last.s.dot(last.y) / last.y.squaredNorm();
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double beta = pairs[k].rho * pairs[k].y.dot(q);
    q += (alpha[k] - beta) * pairs[k].s;
  }
  return q;
}

}  // namespace

LocalSearchResult maximize_box_lbfgs(const Objective& f, const Vector& lower, const Vector& upper,
                                     const Vector& x0, const LocalSearchOptions& options) {
  // Internally minimize F = -f.
  LocalSearchResult result;
  Vector x = x0.cwiseMax(lower).cwiseMin(upper);
  Vector grad(x.size());
  double value = -f(x, &grad);
  Vector g = -grad;
  result.evaluations = 1;
  result.x = x;
  result.value = -value;
  result.start_value = -value;
  if (!std::isfinite(value) || !g.allFinite()) {
    result.line_search_failed = true;
    return result;
  }

  std::deque<CurvaturePair> pairs;
  int stalled = 0;
  for (int it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    Vector pg = g;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const bool pinned_low = x(i) <= lower(i) && g(i) > 0.0;
      const bool pinned_high = x(i) >= upper(i) && g(i) < 0.0;
      if (pinned_low || pinned_high) pg(i) = 0.0;
    }
    const double pg_norm = pg.lpNorm<Eigen::Infinity>();
    if (pg_norm <= options.gradient_tolerance) {
      result.converged = true;
      break;
    }

    auto steepest = [&] { return Vector(-pg * (options.initial_step / pg_norm)); };
    Vector direction;
    if (pairs.empty()) {
      direction = steepest();
    } else {
      direction = -two_loop(pairs, pg);
      for (Eigen::Index i = 0; i < x.size(); ++i)
        if (pg(i) == 0.0) direction(i) = 0.0;
      if (!(direction.dot(pg) < 0.0) || !direction.allFinite()) {
        pairs.clear();
        direction = steepest();
      }
    }

    bool accepted = false;
    Vector x_trial;
    Vector grad_trial(x.size());
    double value_trial = 0.0;
    double t = 1.0;
    for (int k = 0; k < options.max_backtracks; ++k, t *= 0.5) {
      x_trial = (x + t * direction).cwiseMax(lower).cwiseMin(upper);
      const Vector step = x_trial - x;
      if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
      value_trial = -f(x_trial, &grad_trial);
      ++result.evaluations;
      if (!std::isfinite(value_trial) || !grad_trial.allFinite()) continue;
      if (value_trial <= value + options.armijo * g.dot(step) && value_trial <= value) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!pairs.empty()) {
        pairs.clear();
        continue;
      }
      result.line_search_failed = true;
      break;
    }

    const Vector g_trial = -grad_trial;
    const Vector s = x_trial - x;
    const Vector y = g_trial - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      pairs.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(pairs.size()) > options.memory) pairs.pop_front();
    }

    const double change = value - value_trial;
    x = x_trial;
    g = g_trial;
    value = value_trial;
    if (change <= options.value_tolerance * std::max(1.0, std::abs(value))) {
      if (++stalled >= 3) {
        result.converged = true;
        break;
      }
    } else {
      stalled = 0;
    }
  }
  result.x = x;
  result.value = -value;
  return result;
}

std::vector<Vector> restart_points(const SearchDomain& domain, const OptimizerConfig& config,
                                   const std::vector<Vector>& extra_starts) {
  std::vector<Vector> starts;
  const PointSet unit = scrambled_halton(config.restarts, domain.dim(), config.seed);
  for (Eigen::Index i = 0; i < unit.cols(); ++i) starts.push_back(domain.from_unit(unit.col(i)));
  for (const Vector& s : extra_starts) starts.push_back(domain.project(s));
  return starts;
}

namespace {

OptimizeResult pick_best(const std::vector<Vector>& endpoints, const std::vector<double>& values) {
  OptimizeResult out;
  out.restart_values = values;
  out.endpoints = endpoints;
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best] || (std::isnan(values[best]) && !std::isnan(values[i]))) best = i;
  out.x = endpoints[best];
  out.value = values[best];
  return out;
}

}  // namespace

OptimizeResult maximize_deterministic(const Objective& f, const SearchDomain& domain,
                                      const OptimizerConfig& config,
                                      const std::vector<Vector>& extra_starts) {
  if (config.restarts < 1) throw std::invalid_argument("optimizer: restarts must be >= 1");
  const std::vector<Vector> starts = restart_points(domain, config, extra_starts);
  const int n = static_cast<int>(starts.size());
  std::vector<Vector> endpoints(n);
  std::vector<double> values(n);
  std::vector<char> moved(n, 0);
  LocalSearchOptions options;
  options.max_iterations = config.max_iterations;
  options.gradient_tolerance = config.gradient_tolerance;
  options.initial_step = 0.1 * (domain.upper() - domain.lower()).maxCoeff();
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    const LocalSearchResult r = maximize_box_lbfgs(f, domain.lower(), domain.upper(), starts[i], options);
    endpoints[i] = r.x;
    values[i] = r.value;
    moved[i] = r.value > r.start_value;
  }
  OptimizeResult out = pick_best(endpoints, values);
  bool any_moved = false;
  for (char m : moved) any_moved = any_moved || m;
  out.flagged = !any_moved;
  return out;
}

namespace {

Vector run_sga(const GradientSampler& sampler, const SearchDomain& domain, Vector x, double a,
               double b, int iterations, CounterRng& rng) {
  for (int t = 0; t < iterations; ++t) {
    const Vector g = sampler(x, rng);
    if (!g.allFinite()) break;  // diverged sample: keep the last good iterate
    x = domain.project(x + (a / (b + t)) * g);
  }
  return x;
}

}  // namespace

OptimizeResult maximize_sga(const GradientSampler& sampler, const ValueEstimator& ranker,
                            const SearchDomain& domain, const OptimizerConfig& config,
                            const std::vector<Vector>& extra_starts) {
  if (config.restarts < 1) throw std::invalid_argument("optimizer: restarts must be >= 1");
  const std::vector<Vector> starts = restart_points(domain, config, extra_starts);
  const double width = (domain.upper() - domain.lower()).maxCoeff();
  const SgaSchedule& sched = config.sga;

  double a = sched.a;
  if (!(a > 0.0)) {
    // Bracket the rate on the first restart: a geometric ladder scaled to the
    // box width and the initial gradient magnitude, judged by the ranker.
    CounterRng probe(config.seed, 0x5a5a);
    const Vector g0 = sampler(starts.front(), probe);
    const double g_norm = std::max(g0.lpNorm<Eigen::Infinity>(), 1e-12);
    const double base = 0.1 * width * sched.b / g_norm;
    double best_value = -std::numeric_limits<double>::infinity();
    for (int k = -3; k <= 3; ++k) {
      const double candidate = base * std::pow(4.0, k);
      CounterRng rng(config.seed, 0x7a11 + static_cast<std::uint64_t>(k + 3));
      const Vector end = run_sga(sampler, domain, starts.front(), candidate, sched.b,
                                 sched.tuning_iterations, rng);
      const double v = ranker(end);
      if (v > best_value) {
        best_value = v;
        a = candidate;
      }
    }
  }

  const int n = static_cast<int>(starts.size());
  std::vector<Vector> endpoints(n);
  std::vector<double> values(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    CounterRng rng(config.seed, 0x1000 + static_cast<std::uint64_t>(i));
    endpoints[i] = run_sga(sampler, domain, starts[i], a, sched.b, sched.iterations, rng);
    values[i] = ranker(endpoints[i]);
  }
  OptimizeResult out = pick_best(endpoints, values);
  out.learning_rate = a;
  return out;
}

OptimizeResult maximize_one_shot(const Objective& joint, const SearchDomain& domain, int samples,
                                 const OptimizerConfig& config,
                                 const std::vector<Vector>& joint_starts) {
  const int d = domain.dim();
  const long long dimension = static_cast<long long>(d) * (samples + 1);
  if (dimension > config.max_one_shot_dimension)
    throw std::length_error("one-shot problem dimension " + std::to_string(dimension) +
                            " exceeds cap " + std::to_string(config.max_one_shot_dimension) +
                            "; reduce the number of samples");
  if (joint_starts.empty()) throw std::invalid_argument("maximize_one_shot: no start points");
  Vector lower(dimension);
  Vector upper(dimension);
  for (int m = 0; m <= samples; ++m) {
    lower.segment(m * d, d) = domain.lower();
    upper.segment(m * d, d) = domain.upper();
  }
  LocalSearchOptions options;
  options.max_iterations = config.max_iterations;
  options.gradient_tolerance = config.gradient_tolerance;
  options.initial_step = 0.1 * (domain.upper() - domain.lower()).maxCoeff();
  const int n = static_cast<int>(joint_starts.size());
  std::vector<Vector> endpoints(n);
  std::vector<double> values(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    const LocalSearchResult r = maximize_box_lbfgs(joint, lower, upper, joint_starts[i], options);
    endpoints[i] = r.x;
    values[i] = r.value;
  }
  OptimizeResult best = pick_best(endpoints, values);
  best.joint = best.x;
  best.x = Vector(best.joint.head(d));
  return best;
}

}  // namespace greybox
