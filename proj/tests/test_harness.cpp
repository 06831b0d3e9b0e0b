#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "greybox/cli.h"
#include "greybox/config.h"
#include "greybox/harness.h"
#include "greybox/summary.h"
#include "greybox/trace.h"

using namespace greybox;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("greybox_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunConfig parse(const std::string& text) { return RunConfig::from_config(Config::parse(text)); }

TraceRow row(int iteration, double regret, double cost) {
  TraceRow r;
  r.iteration = iteration;
  r.x = Vector::Zero(1);
  r.y = Vector::Zero(1);
  r.best_so_far = -regret;
  r.regret = regret;
  r.cumulative_cost = cost;
  return r;
}

void check_invariants(const std::vector<TraceRow>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].best_so_far >= rows[i - 1].best_so_far);
    CHECK(rows[i].cumulative_cost > rows[i - 1].cumulative_cost);
    CHECK(rows[i].iteration == rows[i - 1].iteration + 1);
  }
}

}  // namespace

TEST_CASE("config parsing") {
  const Config c = Config::parse("# comment\n a = 1 \n\nb.c=x y\n");
  CHECK(c.get("a", "") == "1");
  CHECK(c.get("b.c", "") == "x y");
  CHECK_THROWS_AS(Config::parse("a=1\na=2\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse("just words\n"), ConfigError);
  CHECK_THROWS_WITH_AS(Config::parse("n=abc").get_int("n", 0), doctest::Contains("n:"), ConfigError);
}

TEST_CASE("run config validation names the offending key") {
  const std::string base = "problem.name=square_scalar\nmethod.name=ei-bb\nbudget=6\n";
  CHECK_NOTHROW(parse(base));
  auto key_of = [&](const std::string& text) {
    try {
      parse(text);
    } catch (const ConfigError& e) {
      return e.key();
    }
    return std::string("<none>");
  };
  CHECK(key_of(base + "acq.sampels=3\n") == "acq.sampels");
  CHECK(key_of("problem.name=square_scalar\nmethod.name=ei-bb\nbudget=0\n") == "budget");
  CHECK(key_of(base + "replications=0\n") == "replications");
  CHECK(key_of("problem.name=square_scalar\nmethod.name=mf-kg\nbudget=6\n") == "method.name");
  CHECK(key_of("problem.name=queuing_mf\nmethod.name=ei-cf\nbudget=6\n") == "method.name");
  CHECK(key_of("problem.name=calibration\nproblem.d=9\nmethod.name=ei-bb\nbudget=6\n") == "problem.d");
  CHECK(key_of(base + "model.kernel=rbf2\n") == "model.kernel");
  CHECK(key_of("problem.name=nothing\nmethod.name=ei-bb\nbudget=6\n") == "problem.name");
  CHECK(parse("problem.name=queuing_mf\nmethod.name=mf-kg\nbudget=6\n").budget_unit == BudgetUnit::Cost);
}

TEST_CASE("config round trip through to_config") {
  const RunConfig a = parse("problem.name=calibration\nproblem.d=2\nmethod.name=kg-cf\nbudget=9\nacq.samples=7\n");
  const RunConfig b = RunConfig::from_config(a.to_config());
  CHECK(a.to_config().serialize() == b.to_config().serialize());
  CHECK(b.samples == 7);
  CHECK(b.problem_params.at("d") == "2");
}

TEST_CASE("budget equal to the design size gives design rows only") {
  RunConfig c = parse("problem.name=square_scalar\nmethod.name=kg-bb\nbudget=4\n");
  const RunResult r = run(c);
  REQUIRE(r.replications.size() == 1);
  REQUIRE(r.replications[0].rows.size() == 4);
  for (const auto& row : r.replications[0].rows) CHECK_FALSE(row.acquisition.has_value());
}

TEST_CASE("method random is random_search") {
  const RunConfig c = parse("problem.name=calibration\nmethod.name=random\nbudget=12\nseed=5\nreplications=2\n");
  const RunResult r = run(c);
  const Problem p = build_problem(c);
  for (int rep = 0; rep < 2; ++rep) {
    const auto expected = random_search(p, 12, BudgetUnit::Evaluations, 5 + rep, rep);
    const auto& got = r.replications[rep].rows;
    REQUIRE(got.size() == expected.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(format_trace_row(got[i]) == format_trace_row(expected[i]));
  }
}

TEST_CASE("every method produces well-formed traces") {
  const std::vector<std::string> configs = {
      "problem.name=square_scalar\nmethod.name=ei-bb\nbudget=7\n",
      "problem.name=square_scalar\nmethod.name=kg-bb\nbudget=6\nacq.kg_strategy=one-shot\nacq.samples=8\n",
      "problem.name=square_scalar\nmethod.name=ei-cf\nbudget=6\nacq.optimizer=sga\n",
      "problem.name=calibration\nproblem.d=2\nproblem.k=2\nmethod.name=ei-cf\nbudget=8\nacq.samples=16\n",
      "problem.name=calibration\nproblem.d=2\nproblem.k=2\nmethod.name=kg-cf\nbudget=7\nacq.kgcf_candidates=8\n",
      "problem.name=queuing_mf\nmethod.name=mf-kg\nbudget=5\nacq.cost_model=log-gp\nmodel.variant=augmented\n",
      "problem.name=constituent_sum\nproblem.k=4\nmethod.name=constituent-kg\nbudget=20\nacq.cost_normalize=true\n",
      "problem.name=calibration\nproblem.d=2\nproblem.k=2\nmethod.name=ei-cf\nbudget=7\nmodel.variant=icm\nproblem.noise=1e-4\n",
  };
  for (const auto& text : configs) {
    CAPTURE(text);
    const RunResult r = run(parse(text));
    REQUIRE(r.replications.size() == 1);
    CHECK(r.replications[0].ok);
    CHECK(r.replications[0].error == "");
    const auto& rows = r.replications[0].rows;
    CHECK(rows.size() > 4);
    check_invariants(rows);
    CHECK(rows.back().acquisition.has_value());
  }
}

TEST_CASE("re-running from a manifest reproduces the trace bitwise") {
  const fs::path a = scratch("manifest_a"), b = scratch("manifest_b");
  const RunConfig c = parse("problem.name=square_scalar\nmethod.name=ei-cf\nbudget=7\nreplications=2\nseed=11\n");
  write_run(run(c), a.string());
  const RunConfig again = RunConfig::from_config(Config::load((a / "manifest.txt").string()));
  write_run(run(again), b.string());
  for (int r = 0; r < 2; ++r) {
    const std::string name = trace_file_name(r);
    CHECK(slurp(a / name) == slurp(b / name));
    CHECK(!slurp(a / name).empty());
  }
  const auto rows = read_trace_csv((a / trace_file_name(0)).string());
  CHECK(rows.size() == 7);
  CHECK(format_trace_row(rows[5]) == format_trace_row(run(c).replications[0].rows[5]));
}

TEST_CASE("trace rows round-trip through CSV") {
  TraceRow r = row(3, 0.25, 7.5);
  r.x = Vector::LinSpaced(2, 0.1, 0.2);
  r.tag = 2;
  r.y = Vector::Constant(3, 1.0 / 3.0);
  r.acquisition = 1e-300;
  const fs::path dir = scratch("trace");
  write_trace_csv((dir / "t.csv").string(), {r});
  const auto back = read_trace_csv((dir / "t.csv").string());
  REQUIRE(back.size() == 1);
  CHECK(format_trace_row(back[0]) == format_trace_row(r));
  CHECK(back[0].y(0) == 1.0 / 3.0);
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("summary statistics") {
  const TraceSet fixture = {{row(1, 1.0, 1), row(2, 0.1, 2), row(3, 0.001, 3)}};
  CHECK(evaluations_to_target(fixture, 0.01) == 3);
  CHECK(evaluations_to_target(fixture, 1e-6) == std::nullopt);
  const auto curve = log_regret_by_evaluation(fixture);
  REQUIRE(curve.size() == 3);
  CHECK(curve[1].median == doctest::Approx(-1.0));
  CHECK(curve[1].q25 == curve[1].median);
  // Zero regret hits the documented floor.
  const auto zero = log_regret_by_evaluation({{row(1, 0.0, 1)}});
  CHECK(zero[0].median == doctest::Approx(-12.0));
  CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
  CHECK(quantile({4.0, 1.0, 3.0}, 0.25) == 2.0);
  const TraceSet two = {{row(1, 1.0, 2), row(2, 0.5, 4)}, {row(1, 0.2, 1), row(2, 0.1, 5)}};
  CHECK(median_cost_to_reach(two, 0.5) == doctest::Approx(2.5));
  CHECK(median_regret_at_cost(two, 4.0) == doctest::Approx(0.35));
  CHECK(median_regret_at_evaluation(two, 5) == doctest::Approx(0.3));
}

TEST_CASE("cli round trip") {
  const fs::path dir = scratch("cli");
  {
    std::ofstream cfg(dir / "smoke.cfg");
    cfg << "problem.name=square_scalar\nmethod.name=ei-bb\nbudget=6\nreplications=2\n";
    std::ofstream bad(dir / "bad.cfg");
    bad << "problem.name=square_scalar\nmethod.name=ei-bb\nbudget=6\nopt.restart=3\n";
  }
  std::ostringstream out, err;
  CHECK(cli_dispatch({"run", (dir / "smoke.cfg").string(), "--out", (dir / "run").string()}, out, err) == kExitOk);
  CHECK(fs::exists(dir / "run" / "manifest.txt"));
  CHECK(fs::exists(dir / "run" / "timing_r001.csv"));
  CHECK(cli_dispatch({"summarize", dir.string(), "--target", "0.5"}, out, err) == kExitOk);
  CHECK(fs::exists(dir / "summary_evaluations.csv"));
  CHECK(fs::exists(dir / "summary_targets.csv"));

  std::ostringstream e2;
  CHECK(cli_dispatch({"run", (dir / "bad.cfg").string()}, out, e2) == kExitConfig);
  CHECK(e2.str().find("opt.restart") != std::string::npos);
  std::ostringstream methods;
  CHECK(cli_dispatch({"list-methods"}, methods, err) == kExitOk);
  CHECK(methods.str() == "random\nei-bb\nkg-bb\nei-cf\nkg-cf\nmf-kg\nconstituent-kg\n");
  std::ostringstream e3;
  CHECK(cli_dispatch({"frobnicate"}, out, e3) == kExitConfig);
  CHECK(e3.str().find("usage") != std::string::npos);
  CHECK(cli_dispatch({"summarize", (dir / "empty").string()}, out, err) == kExitRuntime);
}
