#include "greybox/problems.h"

#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "greybox/batch.h"
#include "greybox/optimize.h"
#include "greybox/rng.h"

namespace greybox {

std::string to_string(Surface surface) {
  switch (surface) {
    case Surface::Full:
      return "full";
    case Surface::Inner:
      return "inner";
    case Surface::Fidelity:
      return "fidelity";
    case Surface::Constituent:
      return "constituent";
  }
  return "unknown";
}

bool Problem::has(Surface s) const {
  switch (s) {
    case Surface::Full:
      return static_cast<bool>(full);
    case Surface::Inner:
      return static_cast<bool>(inner) && outer.has_value();
    case Surface::Fidelity:
    case Surface::Constituent:
      return static_cast<bool>(tagged) && tagged_kind == s;
  }
  return false;
}

int Problem::outputs() const {
  if (outer) return outer->outputs();
  if (tagged) return static_cast<int>(tags.size());
  return 1;
}

namespace {

// sum_t a_t sin(omega_t . x + phase_t); omega is d x terms.
struct SinusoidSum {
  Vector amplitude;
  Matrix omega;
  Vector phase;

  static SinusoidSum draw(CounterRng& rng, int d, int terms, double amp_lo, double amp_hi, double freq) {
    SinusoidSum s{Vector(terms), Matrix(d, terms), Vector(terms)};
    for (int t = 0; t < terms; ++t) {
      s.amplitude(t) = rng.uniform(amp_lo, amp_hi);
      for (int i = 0; i < d; ++i) s.omega(i, t) = rng.uniform(-freq, freq);
      s.phase(t) = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    return s;
  }

  double operator()(ConstPoint x, double shift = 0.0, const Vector* w_freq = nullptr) const {
    double v = 0.0;
    for (Eigen::Index t = 0; t < amplitude.size(); ++t) {
      double arg = omega.col(t).dot(x) + phase(t);
      if (w_freq != nullptr) arg += (*w_freq)(t) * shift;
      v += amplitude(t) * std::sin(arg);
    }
    return v;
  }
};

// Maximizes fn over a box: dense scan, then local refinement of the best few
// scan points with central-difference gradients.
std::pair<Vector, double> scan_and_refine(const std::function<double(ConstPoint)>& fn,
                                          const SearchDomain& domain, int per_dim) {
  const int d = domain.dim();
  long long total = 1;
  for (int i = 0; i < d; ++i) total *= per_dim;
  PointSet grid(d, total);
  for (long long c = 0; c < total; ++c) {
    long long rem = c;
    Vector u(d);
    for (int i = 0; i < d; ++i) {
      u(i) = static_cast<double>(rem % per_dim) / (per_dim - 1);
      rem /= per_dim;
    }
    grid.col(c) = domain.from_unit(u);
  }
  Vector values = parallel::evaluate(fn, grid);
  const Objective obj = [&](const Vector& x, Vector* g) {
    if (g != nullptr) {
      g->resize(d);
      for (int i = 0; i < d; ++i) {
        const double h = 1e-6 * (domain.upper()(i) - domain.lower()(i));
        Vector a = x, b = x;
        a(i) = std::min(a(i) + h, domain.upper()(i));
        b(i) = std::max(b(i) - h, domain.lower()(i));
        (*g)(i) = (fn(a) - fn(b)) / (a(i) - b(i));
      }
    }
    return fn(x);
  };
  Vector best_x;
  double best = -std::numeric_limits<double>::infinity();
  LocalSearchOptions opts;
  opts.gradient_tolerance = 1e-10;
  opts.initial_step = 1e-3 * (domain.upper() - domain.lower()).maxCoeff();
  for (int r = 0; r < 5; ++r) {
    const Eigen::Index i = argmax_lowest(values);
    const LocalSearchResult res = maximize_box_lbfgs(obj, domain.lower(), domain.upper(), grid.col(i), opts);
    if (res.value > best) {
      best = res.value;
      best_x = res.x;
    }
    values(i) = -std::numeric_limits<double>::infinity();
  }
  return {best_x, best};
}

}  // namespace

Problem problem_square_scalar() {
  Problem p;
  p.name = "square_scalar";
  p.domain = SearchDomain(Vector::Constant(1, -2.0), Vector::Constant(1, 2.0));
  auto h = [](ConstPoint x) { return std::sin(3.0 * x(0)) + 0.6 * x(0); };
  p.inner = [h](ConstPoint x) { return Vector(Vector::Constant(1, h(x))); };
  p.outer = OuterFunction::negative_sum_squares(Vector::Zero(1));
  p.full = [h](ConstPoint x) {
    const double v = h(x);
    return -(v * v);
  };
  p.f_star = 0.0;
  p.x_star = Vector::Zero(1);
  return p;
}

Problem problem_calibration(int d, int k, std::uint64_t seed) {
  if (d < 2 || d > 6) throw std::invalid_argument("problem.d: calibration needs d in [2, 6]");
  if (k < 2 || k > 8) throw std::invalid_argument("problem.k: calibration needs k in [2, 8]");
  CounterRng rng(seed, 0xca11);
  auto components = std::make_shared<std::vector<SinusoidSum>>();
  for (int j = 0; j < k; ++j) components->push_back(SinusoidSum::draw(rng, d, 3, 0.5, 1.0, 4.0));
  Vector hidden(d);
  for (int i = 0; i < d; ++i) hidden(i) = rng.uniform(0.1, 0.9);

  Problem p;
  p.name = "calibration";
  p.domain = SearchDomain::unit(d);
  p.inner = [components](ConstPoint x) {
    Vector h(components->size());
    for (std::size_t j = 0; j < components->size(); ++j) h(j) = (*components)[j](x);
    return h;
  };
  const Vector y_obs = p.inner(hidden);
  p.outer = OuterFunction::negative_sum_squares(y_obs);
  const OuterFunction g = *p.outer;
  const auto inner = p.inner;
  p.full = [g, inner](ConstPoint x) { return g(inner(x)); };
  p.f_star = 0.0;
  p.x_star = hidden;
  return p;
}

double queuing_objective(const QueuingConstants& c, double x, double horizon) {
  const double excess = x - c.lambda;
  const double beta = c.bias / excess;
  return -(c.service_cost * x + c.waiting_cost * c.lambda / excess * (1.0 - beta / horizon));
}

Problem problem_queuing_mf() {
  const QueuingConstants c;
  Problem p;
  p.name = "queuing_mf";
  p.domain = SearchDomain(Vector::Constant(1, c.lower), Vector::Constant(1, c.upper));
  p.tagged_kind = Surface::Fidelity;
  p.tags = Eigen::Map<const Vector>(c.horizons.data(), static_cast<Eigen::Index>(c.horizons.size()));
  p.target = static_cast<int>(c.horizons.size()) - 1;
  const Vector horizons = p.tags;
  p.tagged = [c, horizons](ConstPoint x, int j) { return queuing_objective(c, x(0), horizons(j)); };
  const double t_max = horizons(p.target);
  p.cost = [horizons, t_max](ConstPoint, int j) { return horizons(j) / t_max; };
  p.full = [c, t_max](ConstPoint x) { return queuing_objective(c, x(0), t_max); };
  p.full_cost = 1.0;

  // First-order condition at the target horizon, by bisection on the derivative.
  auto slope = [&](double x) {
    const double e = x - c.lambda;
    return -(c.service_cost - c.waiting_cost * c.lambda / (e * e) +
             2.0 * c.waiting_cost * c.lambda * c.bias / (t_max * e * e * e));
  };
  double lo = c.lower;
  double hi = c.upper;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (slope(mid) > 0.0 ? lo : hi) = mid;
  }
  const double x_star = 0.5 * (lo + hi);
  p.x_star = Vector::Constant(1, x_star);
  p.f_star = queuing_objective(c, x_star, t_max);
  return p;
}

Problem problem_constituent_sum(int k, std::uint64_t seed, int d, double w_scale) {
  if (k < 4 || k > 100) throw std::invalid_argument("problem.k: constituent_sum needs k in [4, 100]");
  if (d < 1 || d > 2) throw std::invalid_argument("problem.d: constituent_sum needs d of 1 or 2");
  CounterRng rng(seed, 0xc0de);
  const SinusoidSum base = SinusoidSum::draw(rng, d, 3, 0.5, 1.0, 8.0);
  Vector w_freq(3);
  for (int t = 0; t < 3; ++t) w_freq(t) = w_scale * rng.uniform(-1.5, 1.5);

  Problem p;
  p.name = "constituent_sum";
  p.domain = SearchDomain::unit(d);
  p.tagged_kind = Surface::Constituent;
  p.tags.resize(k);
  for (int j = 0; j < k; ++j) p.tags(j) = static_cast<double>(j) / (k - 1);
  const Vector tags = p.tags;
  p.tagged = [base, w_freq, tags](ConstPoint x, int j) { return base(x, tags(j), &w_freq); };
  p.cost = [](ConstPoint, int) { return 1.0; };
  p.full_cost = static_cast<double>(k);
  p.full = [base, w_freq, tags](ConstPoint x) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < tags.size(); ++j) total += base(x, tags(j), &w_freq);
    return total;
  };
  const auto [xs, fs] = scan_and_refine(p.full, p.domain, d == 1 ? 20001 : 401);
  p.x_star = xs;
  p.f_star = fs;
  return p;
}

std::vector<ProblemInfo> list_problems() {
  return {
      {"square_scalar", "", "full, inner (k=1, g(y) = -y^2)"},
      {"calibration", "d=3 k=4 seed=7", "full, inner (g = -||y - y_obs||^2)"},
      {"queuing_mf", "", "full, fidelity (T in {10, 30, 100}, cost T/100)"},
      {"constituent_sum", "k=8 seed=1 d=1", "full, constituent (cost 1 each, full cost k)"},
  };
}

namespace {

int int_param(const std::map<std::string, std::string>& params, const std::string& key, int fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    std::size_t used = 0;
    const int v = std::stoi(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("problem." + key + ": expected an integer, got '" + it->second + "'");
  }
}

double real_param(const std::map<std::string, std::string>& params, const std::string& key, double fallback) {
  const auto it = params.find(key);
  if (it == params.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("problem." + key + ": expected a number, got '" + it->second + "'");
  }
}

}  // namespace

Problem make_problem(const std::string& name, const std::map<std::string, std::string>& params) {
  if (name == "square_scalar") return problem_square_scalar();
  if (name == "queuing_mf") return problem_queuing_mf();
  if (name == "calibration")
    return problem_calibration(int_param(params, "d", 3), int_param(params, "k", 4),
                               static_cast<std::uint64_t>(int_param(params, "seed", 7)));
  if (name == "constituent_sum")
    return problem_constituent_sum(int_param(params, "k", 8),
                                   static_cast<std::uint64_t>(int_param(params, "seed", 1)),
                                   int_param(params, "d", 1), real_param(params, "w_scale", 1.0));
  throw std::invalid_argument("problem.name: unknown problem '" + name + "'");
}

}  // namespace greybox
