#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "greybox/acquisition.h"
#include "greybox/domain.h"
#include "greybox/types.h"

namespace greybox {

enum class Surface { Full, Inner, Fidelity, Constituent };

std::string to_string(Surface surface);

/// Deterministic test problem. `full` is the objective being maximized; the
/// other surfaces are present when the corresponding member is set.
struct Problem {
  std::string name;
  SearchDomain domain = SearchDomain::unit(1);
  std::function<double(ConstPoint)> full;
  double full_cost = 1.0;

  /// Composite structure full(x) = outer(inner(x)).
  std::function<Vector(ConstPoint)> inner;
  std::optional<OuterFunction> outer;

  /// Fidelity or constituent surface h(x, w_j), j = 0..tags.size()-1.
  std::function<double(ConstPoint, int)> tagged;
  Surface tagged_kind = Surface::Fidelity;
  Vector tags;     ///< w_j
  int target = -1; ///< target fidelity index (fidelity problems)
  std::function<double(ConstPoint, int)> cost;

  std::optional<double> f_star;
  std::optional<Vector> x_star;

  bool has(Surface s) const;
  /// Number of outputs of the inner or tagged surface (1 for plain problems).
  int outputs() const;
};

Problem problem_square_scalar();
Problem problem_calibration(int d, int k, std::uint64_t seed);
Problem problem_queuing_mf();
/// `w_scale` multiplies the dependence of h on w; 0 makes every constituent identical.
Problem problem_constituent_sum(int k, std::uint64_t seed, int d = 1, double w_scale = 1.0);

/// Queuing surrogate constants.
struct QueuingConstants {
  double lambda = 1.0;
  double service_cost = 1.0;
  double waiting_cost = 4.0;
  double bias = 0.5;  ///< beta(x) = bias / (x - lambda)
  double lower = 1.2;
  double upper = 6.0;
  std::vector<double> horizons{10.0, 30.0, 100.0};
};
double queuing_objective(const QueuingConstants& c, double x, double horizon);

struct ProblemInfo {
  std::string name;
  std::string parameters;
  std::string surfaces;
};
std::vector<ProblemInfo> list_problems();

/// Builds a problem from its name and string parameters (d, k, seed, w_scale).
/// Throws std::invalid_argument naming the offending parameter.
Problem make_problem(const std::string& name, const std::map<std::string, std::string>& params);

}  // namespace greybox
