#include "greybox/harness.h"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>

#include "greybox/acquisition.h"
#include "greybox/batch.h"
#include "greybox/eicf.h"
#include "greybox/gp.h"
#include "greybox/kg.h"
#include "greybox/optimize.h"
#include "greybox/rng.h"

namespace greybox {

const char* const kLibraryVersion = "0.1.0";

namespace {

const std::vector<std::pair<Method, const char*>> kMethodNames = {
    {Method::Random, "random"},         {Method::EiBb, "ei-bb"}, {Method::KgBb, "kg-bb"},
    {Method::EiCf, "ei-cf"},            {Method::KgCf, "kg-cf"}, {Method::MfKg, "mf-kg"},
    {Method::ConstituentKg, "constituent-kg"},
};

// Stream tags for derive_seed.
constexpr std::uint64_t kDesignStream = 0xde51;
constexpr std::uint64_t kNoiseStream = 0x9015e;
constexpr std::uint64_t kRandomStream = 0x7a4d;
constexpr std::uint64_t kFitStream = 0xf17;
constexpr std::uint64_t kOptStream = 0x0b7;
constexpr std::uint64_t kDrawStream = 0xd7a;
constexpr std::uint64_t kRankStream = 0x7a4;
constexpr std::uint64_t kPointStream = 0x9015;

const std::set<std::string> kProblemParams = {"d", "k", "seed", "w_scale"};

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream, long long index) {
  return derive_seed(derive_seed(seed, stream), static_cast<std::uint64_t>(index));
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& [method, name] : kMethodNames)
    if (method == m) return name;
  return "unknown";
}

Method method_from_string(const std::string& name) {
  for (const auto& [method, n] : kMethodNames)
    if (name == n) return method;
  throw std::invalid_argument("unknown method '" + name + "'");
}

std::vector<std::string> list_methods() {
  std::vector<std::string> out;
  for (const auto& entry : kMethodNames) out.emplace_back(entry.second);
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

const std::set<std::string> kKeys = {
    "problem.name",       "problem.noise",        "method.name",        "budget",
    "budget.unit",        "replications",         "seed",               "output.dir",
    "output.hyperparameters", "design.size",      "model.kernel",       "model.refit_every",
    "model.fit_restarts", "model.fit_iterations", "model.fit_noise",    "model.variant",
    "acq.samples",        "acq.rank_samples",     "acq.kg_strategy",    "acq.kg_points_per_dim",
    "acq.fantasy_restarts", "acq.optimizer",      "acq.cost_normalize", "acq.cost_model",
    "acq.kgcf_outer",     "acq.kgcf_inner",       "acq.kgcf_candidates", "opt.restarts",
    "opt.iterations",     "opt.max_one_shot_dimension",
};

int positive_int(const Config& c, const std::string& key, int fallback, int minimum = 1) {
  const long long v = c.get_int(key, fallback);
  if (v < minimum || v > std::numeric_limits<int>::max())
    throw ConfigError(key, "must be at least " + std::to_string(minimum));
  return static_cast<int>(v);
}

std::string one_of(const Config& c, const std::string& key, const std::string& fallback,
                   const std::vector<std::string>& allowed) {
  const std::string v = c.get(key, fallback);
  for (const auto& a : allowed)
    if (v == a) return v;
  std::string list;
  for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
  throw ConfigError(key, "expected one of {" + list + "}, got '" + v + "'");
}

Surface required_surface(Method m) {
  switch (m) {
    case Method::EiCf:
    case Method::KgCf:
      return Surface::Inner;
    case Method::MfKg:
      return Surface::Fidelity;
    case Method::ConstituentKg:
      return Surface::Constituent;
    default:
      return Surface::Full;
  }
}

}  // namespace

Problem build_problem(const RunConfig& config) {
  try {
    return make_problem(config.problem, config.problem_params);
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    if (msg.rfind("problem.", 0) == 0 && colon != std::string::npos)
      throw ConfigError(msg.substr(0, colon), msg.substr(colon + 2));
    throw ConfigError("problem.name", msg);
  }
}

RunConfig RunConfig::from_config(const Config& c) {
  for (const auto& [key, value] : c.entries()) {
    if (kKeys.count(key) > 0 || key.rfind("manifest.", 0) == 0) continue;
    if (key.rfind("problem.", 0) == 0 && kProblemParams.count(key.substr(8)) > 0) continue;
    throw ConfigError(key, "unknown key");
  }
  RunConfig r;
  r.problem = c.require("problem.name");
  for (const auto& p : kProblemParams)
    if (c.has("problem." + p)) r.problem_params[p] = c.get("problem." + p, "");
  r.observation_noise = c.get_double("problem.noise", 0.0);
  if (!(r.observation_noise >= 0.0)) throw ConfigError("problem.noise", "must be non-negative");

  try {
    r.method = method_from_string(c.require("method.name"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("method.name", e.what());
  }
  r.budget = c.get_double("budget", std::numeric_limits<double>::quiet_NaN());
  if (!c.has("budget")) throw ConfigError("budget", "required key is missing");
  if (!(r.budget > 0.0) || !std::isfinite(r.budget)) throw ConfigError("budget", "must be positive");
  const bool cost_default = r.method == Method::MfKg || r.method == Method::ConstituentKg;
  r.budget_unit = one_of(c, "budget.unit", cost_default ? "cost" : "evaluations", {"evaluations", "cost"}) == "cost"
                      ? BudgetUnit::Cost
                      : BudgetUnit::Evaluations;
  r.replications = positive_int(c, "replications", 1);
  const long long seed = c.get_int("seed", 0);
  if (seed < 0) throw ConfigError("seed", "must be non-negative");
  r.seed = static_cast<std::uint64_t>(seed);
  r.output = c.get("output.dir", "out");
  r.record_hyperparameters = c.get_bool("output.hyperparameters", false);
  r.design_size = static_cast<int>(c.get_int("design.size", -1));
  if (r.design_size < -1) throw ConfigError("design.size", "must be -1 (default) or non-negative");

  try {
    r.kernel = kernel_family_from_string(c.get("model.kernel", "matern52"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model.kernel", e.what());
  }
  r.refit_every = positive_int(c, "model.refit_every", 1);
  r.fit_restarts = positive_int(c, "model.fit_restarts", 8);
  r.fit_iterations = positive_int(c, "model.fit_iterations", 200);
  r.fit_noise = c.get_bool("model.fit_noise", false);
  if (c.has("model.variant")) {
    try {
      r.mo_variant = multi_output_variant_from_string(c.get("model.variant", ""));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("model.variant", e.what());
    }
  }

  r.samples = positive_int(c, "acq.samples", 128);
  r.rank_samples = positive_int(c, "acq.rank_samples", 4096);
  r.kg_strategy = one_of(c, "acq.kg_strategy", "discretized", {"discretized", "one-shot"});
  r.kg_points_per_dim = positive_int(c, "acq.kg_points_per_dim", 100);
  r.fantasy_restarts = positive_int(c, "acq.fantasy_restarts", 20);
  r.acq_optimizer = one_of(c, "acq.optimizer", "saa", {"saa", "sga"});
  r.cost_normalize = c.get_bool("acq.cost_normalize", false);
  r.cost_model = one_of(c, "acq.cost_model", "known", {"known", "log-gp"});
  r.kgcf_outer = positive_int(c, "acq.kgcf_outer", 8);
  r.kgcf_inner = positive_int(c, "acq.kgcf_inner", 32);
  r.kgcf_candidates = positive_int(c, "acq.kgcf_candidates", 64);

  r.opt_restarts = positive_int(c, "opt.restarts", 10);
  r.opt_iterations = positive_int(c, "opt.iterations", 200);
  r.max_one_shot_dimension = positive_int(c, "opt.max_one_shot_dimension", 4096);

  // Surface gating happens here so incompatible runs never start.
  const Problem problem = build_problem(r);
  const Surface need = required_surface(r.method);
  if (!problem.has(need))
    throw ConfigError("method.name", "method '" + to_string(r.method) + "' needs the " + to_string(need) +
                                         " surface, which problem '" + r.problem + "' does not provide");
  if (r.mo_variant) {
    const bool tagged = need == Surface::Fidelity || need == Surface::Constituent;
    if (need == Surface::Full)
      throw ConfigError("model.variant", "only applies to multi-output methods");
    if (*r.mo_variant == MultiOutputVariant::LatentFactor && need != Surface::Fidelity)
      throw ConfigError("model.variant", "latent factor model needs a fidelity problem");
    if (*r.mo_variant == MultiOutputVariant::AugmentedInput && !tagged)
      throw ConfigError("model.variant", "augmented-input model needs tagged outputs");
  }
  return r;
}

Config RunConfig::to_config() const {
  Config c;
  c.set("problem.name", problem);
  for (const auto& [k, v] : problem_params) c.set("problem." + k, v);
  c.set("problem.noise", format_double(observation_noise));
  c.set("method.name", to_string(method));
  c.set("budget", format_double(budget));
  c.set("budget.unit", budget_unit == BudgetUnit::Cost ? "cost" : "evaluations");
  c.set("replications", std::to_string(replications));
  c.set("seed", std::to_string(seed));
  c.set("output.dir", output);
  c.set("output.hyperparameters", record_hyperparameters ? "true" : "false");
  c.set("design.size", std::to_string(design_size));
  c.set("model.kernel", to_string(kernel));
  c.set("model.refit_every", std::to_string(refit_every));
  c.set("model.fit_restarts", std::to_string(fit_restarts));
  c.set("model.fit_iterations", std::to_string(fit_iterations));
  c.set("model.fit_noise", fit_noise ? "true" : "false");
  if (mo_variant) c.set("model.variant", to_string(*mo_variant));
  c.set("acq.samples", std::to_string(samples));
  c.set("acq.rank_samples", std::to_string(rank_samples));
  c.set("acq.kg_strategy", kg_strategy);
  c.set("acq.kg_points_per_dim", std::to_string(kg_points_per_dim));
  c.set("acq.fantasy_restarts", std::to_string(fantasy_restarts));
  c.set("acq.optimizer", acq_optimizer);
  c.set("acq.cost_normalize", cost_normalize ? "true" : "false");
  c.set("acq.cost_model", cost_model);
  c.set("acq.kgcf_outer", std::to_string(kgcf_outer));
  c.set("acq.kgcf_inner", std::to_string(kgcf_inner));
  c.set("acq.kgcf_candidates", std::to_string(kgcf_candidates));
  c.set("opt.restarts", std::to_string(opt_restarts));
  c.set("opt.iterations", std::to_string(opt_iterations));
  c.set("opt.max_one_shot_dimension", std::to_string(max_one_shot_dimension));
  return c;
}

// ---------------------------------------------------------------------------
// BO loops

namespace {

using Clock = std::chrono::steady_clock;

const JitterPolicy kRetryJitter{1e-6, 1e-2};

// Runs fn with the default jitter policy, then once more with the escalated one.
template <class Fn>
auto with_jitter_retry(Fn&& fn) {
  try {
    return fn(JitterPolicy{});
  } catch (const FactorizationError&) {
  }
  return fn(kRetryJitter);
}

std::string join_params(const Vector& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i == 0 ? "" : ";") + format_double(v(i));
  return s;
}

class Loop {
 public:
  Loop(const RunConfig& config, const Problem& problem, int replication)
      : cfg_(config),
        problem_(problem),
        unit_(SearchDomain::unit(problem.domain.dim())),
        seed_(config.seed + static_cast<std::uint64_t>(replication)),
        noise_rng_(derive_seed(seed_, kNoiseStream)) {
    result_.replication = replication;
    result_.seed = seed_;
    last_ = Clock::now();
  }

  ReplicationResult run();

 private:
  int dim() const { return problem_.domain.dim(); }
  bool exhausted() const {
    if (cfg_.budget_unit == BudgetUnit::Evaluations)
      return static_cast<double>(result_.rows.size()) >= cfg_.budget - 1e-9;
    return cost_ >= cfg_.budget - 1e-9;
  }
  int iteration() const { return static_cast<int>(result_.rows.size()) + 1; }
  double observe(double truth) {
    if (cfg_.observation_noise <= 0.0) return truth;
    return truth + std::sqrt(cfg_.observation_noise) * noise_rng_.normal();
  }
  PointSet design_points() const {
    const int n = cfg_.design_size < 0 ? 2 * (dim() + 1) : cfg_.design_size;
    return scrambled_halton(n, dim(), derive_seed(seed_, kDesignStream));
  }
  OptimizerConfig optimizer_config(std::uint64_t salt = 0) const {
    OptimizerConfig oc;
    oc.restarts = cfg_.opt_restarts;
    oc.max_iterations = cfg_.opt_iterations;
    oc.max_one_shot_dimension = cfg_.max_one_shot_dimension;
    oc.seed = stream_seed(seed_, kOptStream, iteration() * 131 + static_cast<long long>(salt));
    return oc;
  }
  bool refit_due() const { return fits_ == 0 || (iteration() - 1 - last_fit_rows_) >= cfg_.refit_every; }
  PointSet kg_points(const PointSet& data_x) const {
    const int m = cfg_.kg_points_per_dim * dim();
    PointSet pts(dim(), data_x.cols() + m);
    pts << data_x, scrambled_halton(m, dim(), stream_seed(seed_, kPointStream, iteration()));
    return pts;
  }

  // `achieved`: true objective values credited to best-so-far by this row.
  void append(const Vector& x, std::optional<int> tag, Vector y, double cost, std::optional<double> acq,
              std::initializer_list<double> achieved) {
    for (double v : achieved) best_ = std::max(best_, v);
    cost_ += cost;
    TraceRow row;
    row.replication = result_.replication;
    row.iteration = iteration();
    row.x = x;
    row.tag = tag;
    row.y = std::move(y);
    row.best_so_far = best_;
    row.regret = problem_.f_star ? std::max(0.0, *problem_.f_star - best_) : std::numeric_limits<double>::quiet_NaN();
    row.cumulative_cost = cost_;
    row.acquisition = acq;
    const auto now = Clock::now();
    result_.wall_ms.push_back(std::chrono::duration<double, std::milli>(now - last_).count());
    last_ = now;
    result_.rows.push_back(std::move(row));
  }
  void credit(double v) { best_ = std::max(best_, v); }
  void record_hyper(const std::string& params) {
    if (cfg_.record_hyperparameters)
      result_.hyperparameters.push_back(std::to_string(iteration()) + "," + params);
  }

  void run_scalar();
  void run_composite();
  void run_tagged();

  const RunConfig& cfg_;
  const Problem& problem_;
  SearchDomain unit_;
  std::uint64_t seed_;
  CounterRng noise_rng_;
  ReplicationResult result_;
  Clock::time_point last_;
  double best_ = -std::numeric_limits<double>::infinity();
  double cost_ = 0.0;
  int fits_ = 0;
  int last_fit_rows_ = 0;
};

ReplicationResult Loop::run() {
  switch (cfg_.method) {
    case Method::Random:
      result_.rows = random_search(problem_, cfg_.budget, cfg_.budget_unit, seed_, result_.replication);
      result_.wall_ms.assign(result_.rows.size(), 0.0);
      break;
    case Method::EiBb:
    case Method::KgBb:
      run_scalar();
      break;
    case Method::EiCf:
    case Method::KgCf:
      run_composite();
      break;
    case Method::MfKg:
    case Method::ConstituentKg:
      run_tagged();
      break;
  }
  return std::move(result_);
}

// Black-box EI and KG on the full surface. The model lives on the unit cube.
void Loop::run_scalar() {
  const bool kg = cfg_.method == Method::KgBb;
  Dataset data(dim(), cfg_.fit_noise ? 0.0 : cfg_.observation_noise);
  const PointSet design = design_points();
  for (Eigen::Index i = 0; i < design.cols() && !exhausted(); ++i) {
    const Vector x = problem_.domain.from_unit(design.col(i));
    const double truth = problem_.full(x);
    const double y = observe(truth);
    data.add(design.col(i), y);
    append(x, std::nullopt, Vector::Constant(1, y), problem_.full_cost, std::nullopt, {truth});
  }

  std::optional<FitResult> fit;
  std::unique_ptr<GpPosterior> gp;
  auto condition = [&](const JitterPolicy& jitter) {
    Dataset d = data;
    d.noise_variance = fit->noise_variance;
    return std::make_unique<GpPosterior>(fit->kernel, fit->mean, std::move(d), jitter);
  };

  while (!exhausted()) {
    if (refit_due()) {
      FitOptions fo;
      fo.family = cfg_.kernel;
      fo.restarts = cfg_.fit_restarts;
      fo.seed = stream_seed(seed_, kFitStream, iteration());
      fo.fit_noise = cfg_.fit_noise;
      fo.noise_variance = cfg_.observation_noise;
      fo.max_iterations = cfg_.fit_iterations;
      if (fit) fo.warm_start = fit->kernel;
      fit = with_jitter_retry([&](const JitterPolicy& jitter) {
        fo.jitter = jitter;
        return fit_hyperparameters(data, fo);
      });
      ++fits_;
      last_fit_rows_ = data.size();
      Vector snapshot(fit->kernel.num_params() + 2);
      snapshot << fit->kernel.log_params(), fit->mean.value(), fit->noise_variance;
      record_hyper(join_params(snapshot));
    }
    gp = with_jitter_retry(condition);

    OptimizeResult res;
    if (!kg) {
      const Incumbent inc = posterior_incumbent(*gp, data.x);
      const Objective f = [&](const Vector& u, Vector* grad) { return ei_with_gradient(*gp, inc, u, grad); };
      res = maximize_deterministic(f, unit_, optimizer_config(), {inc.argbest});
    } else {
      const GpKgView view(*gp);
      const MeanMaximum mm = maximize_posterior_mean(view, unit_, data.x);
      if (cfg_.kg_strategy == "one-shot") {
        const Vector z = make_kg_plan(KgSamplePlan::Strategy::OneShot, cfg_.samples, PointSet(dim(), 0),
                                      stream_seed(seed_, kDrawStream, iteration()))
                             .z;
        res = maximize_kg_one_shot(view, unit_, z, optimizer_config(), cfg_.fantasy_restarts);
      } else {
        const DiscretizedKg dk(view, kg_points(data.x));
        const Objective f = [&](const Vector& u, Vector* grad) { return dk.value(u, grad); };
        res = maximize_deterministic(f, unit_, optimizer_config(), {mm.x});
      }
    }

    const Vector x = problem_.domain.from_unit(res.x);
    const double truth = problem_.full(x);
    const double y = observe(truth);
    data.add(res.x, y);
    if (!kg) {
      append(x, std::nullopt, Vector::Constant(1, y), problem_.full_cost, res.value, {truth});
      continue;
    }
    // KG credits the true value at the recommended point (the posterior-mean
    // maximizer after this observation, current hyperparameters).
    gp = with_jitter_retry(condition);
    const MeanMaximum rec = maximize_posterior_mean(GpKgView(*gp), unit_, data.x);
    append(x, std::nullopt, Vector::Constant(1, y), problem_.full_cost, res.value,
           {truth, problem_.full(problem_.domain.from_unit(rec.x))});
  }
}

// EI-CF and KG-CF: a multi-output model of the inner function, composed with the known outer function.
void Loop::run_composite() {
  const OuterFunction& g = *problem_.outer;
  const int k = g.outputs();
  TaggedDataset data(dim(), k, cfg_.fit_noise ? 0.0 : cfg_.observation_noise);
  PointSet visited(dim(), 0);
  std::vector<double> observed_g;

  auto evaluate = [&](const Vector& u, std::optional<double> acq) {
    const Vector x = problem_.domain.from_unit(u);
    const Vector truth = problem_.inner(x);
    Vector y(k);
    for (int j = 0; j < k; ++j) {
      y(j) = observe(truth(j));
      data.add(u, j, y(j));
    }
    visited.conservativeResize(Eigen::NoChange, visited.cols() + 1);
    visited.col(visited.cols() - 1) = u;
    observed_g.push_back(g(y));
    append(x, std::nullopt, y, problem_.full_cost, acq, {g(truth)});
  };

  const PointSet design = design_points();
  for (Eigen::Index i = 0; i < design.cols() && !exhausted(); ++i) evaluate(design.col(i), std::nullopt);

  MoFitOptions fo;
  fo.variant = cfg_.mo_variant.value_or(MultiOutputVariant::Independent);
  fo.family = cfg_.kernel;
  fo.restarts = cfg_.fit_restarts;
  fo.max_iterations = cfg_.fit_iterations;
  fo.tags = Vector::LinSpaced(k, 0.0, 1.0);
  std::optional<MultiOutputModel> model;

  while (!exhausted()) {
    if (refit_due()) {
      fo.seed = stream_seed(seed_, kFitStream, iteration());
      if (model) fo.warm_start = *model;
      model = with_jitter_retry([&](const JitterPolicy& jitter) {
                fo.jitter = jitter;
                return fit_multi_output(data, fo);
              }).model;
      ++fits_;
      last_fit_rows_ = static_cast<int>(visited.cols());
      Vector snapshot(model->num_params() + model->mean_coefficients().size());
      snapshot << model->params(), model->mean_coefficients();
      record_hyper(join_params(snapshot));
    }
    const auto post = with_jitter_retry(
        [&](const JitterPolicy& jitter) { return std::make_unique<MoGpPosterior>(*model, data, jitter); });

    // Incumbent: best of g at the posterior mean over evaluated points.
    Incumbent inc{-std::numeric_limits<double>::infinity(), visited.col(0)};
    for (Eigen::Index i = 0; i < visited.cols(); ++i) {
      const double v = g(post->mean(visited.col(i)));
      if (v > inc.value) inc = {v, visited.col(i)};
    }

    if (cfg_.method == Method::EiCf) {
      const Matrix ranking = CounterRng(stream_seed(seed_, kRankStream, iteration())).normal_matrix(k, cfg_.rank_samples);
      auto rank_value = [&](const Vector& u) { return eicf_value(*post, g, inc, u, ranking).mean; };
      OptimizeResult res;
      Vector best_x;
      double best_v = -std::numeric_limits<double>::infinity();
      if (cfg_.acq_optimizer == "sga") {
        OptimizerConfig oc = optimizer_config();
        oc.step_rule = StepRule::Sga;
        const GradientSampler sampler = [&](const Vector& u, CounterRng& rng) {
          return eicf_gradient_sample(*post, g, inc, u, rng.normal_vector(k));
        };
        res = maximize_sga(sampler, rank_value, unit_, oc, {inc.argbest});
        best_x = res.x;
        best_v = rank_value(res.x);
      } else {
        const Matrix z = CounterRng(stream_seed(seed_, kDrawStream, iteration())).normal_matrix(k, cfg_.samples);
        const Objective f = [&](const Vector& u, Vector* grad) { return eicf_saa(*post, g, inc, u, z, grad); };
        // The incumbent itself has zero variance; nudged copies start inside
        // the region where improvement is still possible.
        std::vector<Vector> extra{inc.argbest};
        CounterRng nudge(stream_seed(seed_, kDrawStream + 1, iteration()));
        for (double scale : {0.01, 0.05})
          extra.push_back(unit_.project(inc.argbest + scale * nudge.normal_vector(dim())));
        res = maximize_deterministic(f, unit_, optimizer_config(), extra);
        // Endpoints are re-ranked with fresh draws so the SAA draw set does not pick the winner.
        best_x = res.x;
        best_v = rank_value(res.x);
        for (const Vector& e : res.endpoints) {
          const double v = rank_value(e);
          if (v > best_v) {
            best_v = v;
            best_x = e;
          }
        }
      }
      evaluate(best_x, best_v);
    } else {
      PointSet discretization(dim(), visited.cols() + 20 * dim());
      discretization << visited, scrambled_halton(20 * dim(), dim(), stream_seed(seed_, kPointStream, iteration()));
      const PointSet candidates =
          scrambled_halton(cfg_.kgcf_candidates, dim(), stream_seed(seed_, kPointStream + 1, iteration()));
      CounterRng rng(stream_seed(seed_, kDrawStream, iteration()));
      const Matrix outer = rng.normal_matrix(k, cfg_.kgcf_outer);
      const Matrix inner = rng.normal_matrix(k, cfg_.kgcf_inner);
      Vector values(candidates.cols());
#pragma omp parallel for schedule(dynamic, 1)
      for (Eigen::Index c = 0; c < candidates.cols(); ++c)
        values(c) = kgcf_value(*post, g, candidates.col(c), discretization, outer, inner);
      const Eigen::Index best = argmax_lowest(values);
      evaluate(candidates.col(best), values(best));
    }
  }
}

// Multi-fidelity KG and constituent KG: one tagged multi-output model, one
// candidate (x, j) per iteration.
void Loop::run_tagged() {
  const bool mf = cfg_.method == Method::MfKg;
  const int k = static_cast<int>(problem_.tags.size());
  const int target = mf ? problem_.target : -1;
  TaggedDataset data(dim(), k, cfg_.fit_noise ? 0.0 : cfg_.observation_noise);
  Vector p = Vector::Zero(k);
  if (mf)
    p(target) = 1.0;
  else
    p.setOnes();

  const PointSet design = design_points();
  for (Eigen::Index i = 0; i < design.cols() && !exhausted(); ++i) {
    const Vector u = design.col(i);
    const Vector x = problem_.domain.from_unit(u);
    if (mf) {
      const double c = problem_.cost(x, target);
      const double y = observe(problem_.tagged(x, target));
      data.add(u, target, y, c);
      append(x, target, Vector::Constant(1, y), c, std::nullopt, {problem_.full(x)});
    } else {
      Vector y(k);
      for (int j = 0; j < k; ++j) {
        y(j) = observe(problem_.tagged(x, j));
        data.add(u, j, y(j), problem_.cost(x, j));
      }
      append(x, std::nullopt, y, problem_.full_cost, std::nullopt, {problem_.full(x)});
    }
  }

  MoFitOptions fo;
  fo.variant = cfg_.mo_variant.value_or(mf ? MultiOutputVariant::LatentFactor : MultiOutputVariant::AugmentedInput);
  fo.family = cfg_.kernel;
  fo.restarts = cfg_.fit_restarts;
  fo.max_iterations = cfg_.fit_iterations;
  fo.tags = problem_.tags / problem_.tags.cwiseAbs().maxCoeff();
  std::optional<MultiOutputModel> model;
  const bool normalize = mf || cfg_.cost_normalize;

  while (!exhausted()) {
    if (refit_due()) {
      fo.seed = stream_seed(seed_, kFitStream, iteration());
      if (model) fo.warm_start = *model;
      model = with_jitter_retry([&](const JitterPolicy& jitter) {
                fo.jitter = jitter;
                return fit_multi_output(data, fo);
              }).model;
      ++fits_;
      last_fit_rows_ = iteration() - 1;
      Vector snapshot(model->num_params() + model->mean_coefficients().size());
      snapshot << model->params(), model->mean_coefficients();
      record_hyper(join_params(snapshot));
    }
    auto condition = [&](const JitterPolicy& jitter) { return std::make_unique<MoGpPosterior>(*model, data, jitter); };
    auto post = with_jitter_retry(condition);

    const CostModel cost =
        cfg_.cost_model == "log-gp"
            ? fit_log_cost_model(data.x, data.output, data.cost, k, stream_seed(seed_, kFitStream + 1, iteration()))
            : CostModel::known([this](ConstPoint u, int j) { return problem_.cost(problem_.domain.from_unit(u), j); });

    std::vector<MoKgView> views;
    views.reserve(k);
    for (int j = 0; j < k; ++j) views.emplace_back(*post, p, j);
    const MeanMaximum mm = maximize_posterior_mean(views[0], unit_, data.x);

    // Distinct evaluated locations plus a fresh low-discrepancy set.
    PointSet located(dim(), 0);
    for (Eigen::Index i = 0; i < data.x.cols(); ++i) {
      bool seen = false;
      for (Eigen::Index l = 0; l < located.cols() && !seen; ++l) seen = located.col(l) == data.x.col(i);
      if (seen) continue;
      located.conservativeResize(Eigen::NoChange, located.cols() + 1);
      located.col(located.cols() - 1) = data.x.col(i);
    }
    const DiscretizedKg base(views[0], kg_points(located));

    int best_j = 0;
    Vector best_x;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      const DiscretizedKg dk = base.rebind(views[j]);
      const Objective f = [&](const Vector& u, Vector* grad) {
        Vector gv;
        const double v = dk.value(u, grad != nullptr ? &gv : nullptr);
        if (!normalize) {
          if (grad != nullptr) *grad = gv;
          return v;
        }
        const double c = cost(u, j);
        if (grad != nullptr) *grad = (gv * c - v * cost.grad(u, j)) / (c * c);
        return v / c;
      };
      const OptimizeResult res = maximize_deterministic(f, unit_, optimizer_config(static_cast<std::uint64_t>(j)), {mm.x});
      if (res.value > best_v) {
        best_v = res.value;
        best_x = res.x;
        best_j = j;
      }
    }

    const Vector x = problem_.domain.from_unit(best_x);
    const double c = problem_.cost(x, best_j);
    const double y = observe(problem_.tagged(x, best_j));
    data.add(best_x, best_j, y, c);
    post = with_jitter_retry(condition);
    const MeanMaximum rec = maximize_posterior_mean(MoKgView(*post, p, 0), unit_, data.x);
    const double rec_value = problem_.full(problem_.domain.from_unit(rec.x));
    if (best_j == target)
      append(x, best_j, Vector::Constant(1, y), c, best_v, {problem_.full(x), rec_value});
    else
      append(x, best_j, Vector::Constant(1, y), c, best_v, {rec_value});
  }
}

}  // namespace

std::vector<TraceRow> random_search(const Problem& problem, double budget, BudgetUnit unit, std::uint64_t seed,
                                    int replication) {
  CounterRng rng(derive_seed(seed, kRandomStream));
  std::vector<TraceRow> rows;
  double best = -std::numeric_limits<double>::infinity();
  double cost = 0.0;
  const int d = problem.domain.dim();
  while (unit == BudgetUnit::Evaluations ? static_cast<double>(rows.size()) < budget - 1e-9 : cost < budget - 1e-9) {
    Vector u(d);
    for (int i = 0; i < d; ++i) u(i) = rng.uniform();
    TraceRow row;
    row.replication = replication;
    row.iteration = static_cast<int>(rows.size()) + 1;
    row.x = problem.domain.from_unit(u);
    const double v = problem.full(row.x);
    best = std::max(best, v);
    cost += problem.full_cost;
    row.y = Vector::Constant(1, v);
    row.best_so_far = best;
    row.regret = problem.f_star ? std::max(0.0, *problem.f_star - best) : std::numeric_limits<double>::quiet_NaN();
    row.cumulative_cost = cost;
    rows.push_back(std::move(row));
  }
  return rows;
}

ReplicationResult run_replication(const RunConfig& config, const Problem& problem, int replication) {
  try {
    return Loop(config, problem, replication).run();
  } catch (const std::exception& e) {
    ReplicationResult failed;
    failed.replication = replication;
    failed.seed = config.seed + static_cast<std::uint64_t>(replication);
    failed.ok = false;
    failed.error = e.what();
    return failed;
  }
}

std::uint64_t oracle_checksum(const Problem& problem) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  const int d = problem.domain.dim();
  const PointSet probes = scrambled_halton(8, d, 0x0c4ec);
  for (Eigen::Index i = 0; i < probes.cols(); ++i) {
    const Vector x = problem.domain.from_unit(probes.col(i));
    mix(problem.full(x));
    if (problem.inner) {
      const Vector h_x = problem.inner(x);
      for (Eigen::Index j = 0; j < h_x.size(); ++j) mix(h_x(j));
    }
    if (problem.tagged)
      for (Eigen::Index j = 0; j < problem.tags.size(); ++j) {
        mix(problem.tagged(x, static_cast<int>(j)));
        mix(problem.cost(x, static_cast<int>(j)));
      }
  }
  return h;
}

RunResult run(const RunConfig& config) {
  const Problem problem = build_problem(config);
  RunResult out;
  out.replications.resize(static_cast<std::size_t>(config.replications));
#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < config.replications; ++r) out.replications[static_cast<std::size_t>(r)] = run_replication(config, problem, r);

  out.manifest = config.to_config();
  out.manifest.set("manifest.version", kLibraryVersion);
  std::ostringstream checksum;
  checksum << std::hex << oracle_checksum(problem);
  out.manifest.set("manifest.oracle_checksum", checksum.str());
  if (problem.f_star) out.manifest.set("manifest.f_star", format_double(*problem.f_star));
  const int n0 = config.design_size < 0 ? 2 * (problem.domain.dim() + 1) : config.design_size;
  out.manifest.set("manifest.design", "scrambled-halton n=" + std::to_string(n0));
  for (const auto& rep : out.replications) {
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "manifest.r%03d.", rep.replication);
    out.manifest.set(std::string(prefix) + "seed", std::to_string(rep.seed));
    out.manifest.set(std::string(prefix) + "status", rep.ok ? "ok" : "failed");
    if (!rep.ok) out.manifest.set(std::string(prefix) + "error", rep.error);
  }
  return out;
}

std::string trace_file_name(int replication) {
  char name[32];
  std::snprintf(name, sizeof name, "trace_r%03d.csv", replication);
  return name;
}

void write_run(const RunResult& result, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream m(fs::path(dir) / "manifest.txt");
    if (!m) throw std::runtime_error("cannot write manifest in '" + dir + "'");
    m << result.manifest.serialize();
  }
  for (const auto& rep : result.replications) {
    write_trace_csv((fs::path(dir) / trace_file_name(rep.replication)).string(), rep.rows);
    char name[32];
    std::snprintf(name, sizeof name, "timing_r%03d.csv", rep.replication);
    std::ofstream t(fs::path(dir) / name);
    t << "iteration,wall_ms\n";
    for (std::size_t i = 0; i < rep.wall_ms.size(); ++i) t << (i + 1) << "," << format_double(rep.wall_ms[i]) << "\n";
    if (!rep.hyperparameters.empty()) {
      std::snprintf(name, sizeof name, "hyper_r%03d.csv", rep.replication);
      std::ofstream h(fs::path(dir) / name);
      h << "iteration,params\n";
      for (const auto& line : rep.hyperparameters) h << line << "\n";
    }
  }
}

}  // namespace greybox
