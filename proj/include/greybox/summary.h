#pragma once

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "greybox/trace.h"

namespace greybox {

/// Floor added to regret before taking log10.
constexpr double kRegretFloor = 1e-12;

using TraceSet = std::vector<std::vector<TraceRow>>;

/// Completed replications per method, read from every manifest.txt in `dir` and
/// its immediate subdirectories. Failed replications are skipped.
std::map<std::string, TraceSet> load_runs(const std::string& dir);

struct QuantileRow {
  double at = 0.0;  ///< evaluation count or cumulative cost
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  int count = 0;
};

/// Linear-interpolation quantile of an unsorted sample.
double quantile(std::vector<double> values, double q);

/// log10(regret + floor) statistics at evaluation 1..max length. A trace that
/// ended early contributes its last value.
std::vector<QuantileRow> log_regret_by_evaluation(const TraceSet& traces);
/// Same at each cost in `grid`, using the last row with cumulative cost <= c.
/// Traces with no row by c are left out; grid points no trace reaches are dropped.
std::vector<QuantileRow> log_regret_by_cost(const TraceSet& traces, const std::vector<double>& grid);

/// First 1-based evaluation at which the median regret is below `threshold`.
std::optional<int> evaluations_to_target(const TraceSet& traces, double threshold);
/// Median regret at a given evaluation count or cost (last row within it).
double median_regret_at_evaluation(const TraceSet& traces, int evaluation);
double median_regret_at_cost(const TraceSet& traces, double cost);
/// Median over traces of the first cumulative cost at which regret <= threshold
/// (infinity for a trace that never gets there).
double median_cost_to_reach(const TraceSet& traces, double threshold);

struct Summary {
  std::map<std::string, std::vector<QuantileRow>> by_evaluation;
  std::map<std::string, std::vector<QuantileRow>> by_cost;
  std::map<std::string, std::optional<int>> to_target;
  std::map<std::string, int> replications;
  std::optional<double> target;
};

/// Summarizes every run under `dir` and writes summary_evaluations.csv,
/// summary_cost.csv and (with a target) summary_targets.csv there.
/// Throws std::runtime_error when there are no completed replications.
Summary summarize(const std::string& dir, std::optional<double> target = std::nullopt);

}  // namespace greybox
