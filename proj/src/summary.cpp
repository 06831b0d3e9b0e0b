#include "greybox/summary.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "greybox/config.h"

namespace greybox {

namespace fs = std::filesystem;

namespace {

void load_one(const fs::path& dir, std::map<std::string, TraceSet>& out) {
  const Config manifest = Config::load((dir / "manifest.txt").string());
  const std::string method = manifest.get("method.name", "unknown");
  const long long reps = manifest.get_int("replications", 0);
  for (long long r = 0; r < reps; ++r) {
    char prefix[48];
    std::snprintf(prefix, sizeof prefix, "manifest.r%03lld.status", r);
    if (manifest.get(prefix, "ok") != "ok") continue;
    char name[32];
    std::snprintf(name, sizeof name, "trace_r%03lld.csv", r);
    const fs::path trace = dir / name;
    if (!fs::exists(trace)) continue;
    std::vector<TraceRow> rows = read_trace_csv(trace.string());
    if (!rows.empty()) out[method].push_back(std::move(rows));
  }
}

double log_regret(double r) { return std::log10(r + kRegretFloor); }

QuantileRow stats(double at, const std::vector<double>& v) {
  return {at, quantile(v, 0.5), quantile(v, 0.25), quantile(v, 0.75), static_cast<int>(v.size())};
}

const TraceRow* last_within_cost(const std::vector<TraceRow>& rows, double cost) {
  const TraceRow* found = nullptr;
  for (const auto& row : rows) {
    if (row.cumulative_cost > cost * (1.0 + 1e-12)) break;
    found = &row;
  }
  return found;
}

std::size_t max_length(const TraceSet& traces) {
  std::size_t n = 0;
  for (const auto& t : traces) n = std::max(n, t.size());
  return n;
}

}  // namespace

std::map<std::string, TraceSet> load_runs(const std::string& dir) {
  std::map<std::string, TraceSet> out;
  if (!fs::is_directory(dir)) throw std::runtime_error("'" + dir + "' is not a directory");
  if (fs::exists(fs::path(dir) / "manifest.txt")) load_one(dir, out);
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.txt")) subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& s : subdirs) load_one(s, out);
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || values[lo] == values[hi]) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<QuantileRow> log_regret_by_evaluation(const TraceSet& traces) {
  std::vector<QuantileRow> out;
  const std::size_t n = max_length(traces);
  for (std::size_t e = 1; e <= n; ++e) {
    std::vector<double> v;
    for (const auto& t : traces) v.push_back(log_regret(t[std::min(e, t.size()) - 1].regret));
    out.push_back(stats(static_cast<double>(e), v));
  }
  return out;
}

std::vector<QuantileRow> log_regret_by_cost(const TraceSet& traces, const std::vector<double>& grid) {
  std::vector<QuantileRow> out;
  for (double c : grid) {
    std::vector<double> v;
    for (const auto& t : traces)
      if (const TraceRow* row = last_within_cost(t, c)) v.push_back(log_regret(row->regret));
    if (!v.empty()) out.push_back(stats(c, v));
  }
  return out;
}

double median_regret_at_evaluation(const TraceSet& traces, int evaluation) {
  if (traces.empty() || evaluation < 1) throw std::invalid_argument("median_regret_at_evaluation: no data");
  std::vector<double> v;
  for (const auto& t : traces) v.push_back(t[std::min<std::size_t>(evaluation, t.size()) - 1].regret);
  return quantile(v, 0.5);
}

double median_regret_at_cost(const TraceSet& traces, double cost) {
  std::vector<double> v;
  for (const auto& t : traces)
    if (const TraceRow* row = last_within_cost(t, cost)) v.push_back(row->regret);
  if (v.empty()) throw std::invalid_argument("median_regret_at_cost: no trace reaches that cost");
  return quantile(v, 0.5);
}

std::optional<int> evaluations_to_target(const TraceSet& traces, double threshold) {
  if (traces.empty()) throw std::invalid_argument("evaluations_to_target: no traces");
  const std::size_t n = max_length(traces);
  for (std::size_t e = 1; e <= n; ++e)
    if (median_regret_at_evaluation(traces, static_cast<int>(e)) < threshold) return static_cast<int>(e);
  return std::nullopt;
}

double median_cost_to_reach(const TraceSet& traces, double threshold) {
  if (traces.empty()) throw std::invalid_argument("median_cost_to_reach: no traces");
  std::vector<double> v;
  for (const auto& t : traces) {
    double c = std::numeric_limits<double>::infinity();
    for (const auto& row : t)
      if (row.regret <= threshold) {
        c = row.cumulative_cost;
        break;
      }
    v.push_back(c);
  }
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

Summary summarize(const std::string& dir, std::optional<double> target) {
  const auto runs = load_runs(dir);
  if (runs.empty()) throw std::runtime_error("no completed replications under '" + dir + "'");
  Summary s;
  s.target = target;
  double max_cost = 0.0;
  for (const auto& [method, traces] : runs)
    for (const auto& t : traces) max_cost = std::max(max_cost, t.back().cumulative_cost);
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(max_cost * i / 100.0);

  std::ofstream ev(fs::path(dir) / "summary_evaluations.csv");
  std::ofstream co(fs::path(dir) / "summary_cost.csv");
  if (!ev || !co) throw std::runtime_error("cannot write summary files in '" + dir + "'");
  ev << "method,evaluation,median_log10_regret,q25,q75,replications\n";
  co << "method,cost,median_log10_regret,q25,q75,replications\n";
  for (const auto& [method, traces] : runs) {
    s.replications[method] = static_cast<int>(traces.size());
    s.by_evaluation[method] = log_regret_by_evaluation(traces);
    s.by_cost[method] = log_regret_by_cost(traces, grid);
    for (const auto& r : s.by_evaluation[method])
      ev << method << "," << static_cast<int>(r.at) << "," << format_double(r.median) << "," << format_double(r.q25)
         << "," << format_double(r.q75) << "," << r.count << "\n";
    for (const auto& r : s.by_cost[method])
      co << method << "," << format_double(r.at) << "," << format_double(r.median) << "," << format_double(r.q25)
         << "," << format_double(r.q75) << "," << r.count << "\n";
    if (target) s.to_target[method] = evaluations_to_target(traces, *target);
  }
  if (target) {
    std::ofstream tg(fs::path(dir) / "summary_targets.csv");
    tg << "method,threshold,evaluations_to_target\n";
    for (const auto& [method, e] : s.to_target)
      tg << method << "," << format_double(*target) << "," << (e ? std::to_string(*e) : "") << "\n";
  }
  return s;
}

}  // namespace greybox
