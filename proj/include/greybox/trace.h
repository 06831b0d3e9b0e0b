#pragma once

#include <optional>
#include <string>
#include <vector>

#include "greybox/types.h"

namespace greybox {

/// One evaluation of a BO run.
struct TraceRow {
  int replication = 0;
  int iteration = 0;
  Vector x;
  std::optional<int> tag;  ///< fidelity or constituent index, empty for full evaluations
  Vector y;                ///< observed value(s)
  double best_so_far = 0.0;
  double regret = 0.0;
  double cumulative_cost = 0.0;
  std::optional<double> acquisition;  ///< empty for initial-design rows
};

/// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

std::string trace_header();
std::string format_trace_row(const TraceRow& row);
void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows);
std::vector<TraceRow> read_trace_csv(const std::string& path);

}  // namespace greybox
