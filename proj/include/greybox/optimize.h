#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "greybox/domain.h"
#include "greybox/rng.h"
#include "greybox/types.h"

namespace greybox {

/// Objective to maximize. When `grad` is non-null it must be filled with the gradient.
using Objective = std::function<double(const Vector& x, Vector* grad)>;

struct LocalSearchOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;  ///< on the projected gradient, infinity norm
  double value_tolerance = 1e-13;    ///< relative change that counts as stalled
  int memory = 10;
  double armijo = 1e-4;
  double initial_step = 0.1;  ///< first steepest-ascent move, infinity norm
  int max_backtracks = 40;
};

struct LocalSearchResult {
  Vector x;
  double value = 0.0;
  double start_value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// Projected limited-memory quasi-Newton ascent on a box. Variables pinned at a
/// bound with the gradient pointing outward are frozen for the step; the
/// direction comes from the two-loop recursion and is accepted with a
/// backtracking Armijo search along the projected path. The returned value is
/// never below the value at the (projected) start point.
LocalSearchResult maximize_box_lbfgs(const Objective& f, const Vector& lower, const Vector& upper,
                                     const Vector& x0, const LocalSearchOptions& options = {});

enum class StepRule { QuasiNewton, Sga };

/// Learning rate a / (b + t). a <= 0 requests automatic tuning on the first restart.
struct SgaSchedule {
  double a = 0.0;
  double b = 10.0;
  int iterations = 200;
  int tuning_iterations = 50;
};

struct OptimizerConfig {
  int restarts = 10;
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
  StepRule step_rule = StepRule::QuasiNewton;
  SgaSchedule sga;
  std::uint64_t seed = 0;
  int max_one_shot_dimension = 4096;
};

struct OptimizeResult {
  Vector x;
  double value = 0.0;
  /// Set when no local search improved on its start point.
  bool flagged = false;
  std::vector<double> restart_values;
  std::vector<Vector> endpoints;  ///< one per restart, same order as restart_values
  double learning_rate = 0.0;  ///< SGA only
  Vector joint;                ///< one-shot only: the full stacked solution
};

/// Start points: `config.restarts` scrambled Halton points followed by `extra_starts`.
std::vector<Vector> restart_points(const SearchDomain& domain, const OptimizerConfig& config,
                                   const std::vector<Vector>& extra_starts);

/// Multistart projected quasi-Newton. Restarts run in parallel; the best value
/// wins with ties going to the earliest restart.
OptimizeResult maximize_deterministic(const Objective& f, const SearchDomain& domain,
                                      const OptimizerConfig& config,
                                      const std::vector<Vector>& extra_starts = {});

/// Unbiased stochastic gradient of the acquisition at x.
using GradientSampler = std::function<Vector(const Vector& x, CounterRng& rng)>;
/// Low-noise value estimate used to rank restart endpoints (and tune the rate).
using ValueEstimator = std::function<double(const Vector& x)>;

/// Multistart projected stochastic gradient ascent with step a/(b+t).
OptimizeResult maximize_sga(const GradientSampler& sampler, const ValueEstimator& ranker,
                            const SearchDomain& domain, const OptimizerConfig& config,
                            const std::vector<Vector>& extra_starts = {});

/// Deterministic maximization of a sample-average objective over the stacked
/// vector (x, x'_1, ..., x'_M), each block confined to `domain`. Returns the x
/// block and the objective value. Throws std::length_error when d*(M+1)
/// exceeds config.max_one_shot_dimension.
OptimizeResult maximize_one_shot(const Objective& joint, const SearchDomain& domain, int samples,
                                 const OptimizerConfig& config,
                                 const std::vector<Vector>& joint_starts);

}  // namespace greybox
