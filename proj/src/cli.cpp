#include "greybox/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <optional>

#include "greybox/batch.h"
#include "greybox/config.h"
#include "greybox/harness.h"
#include "greybox/summary.h"

namespace greybox {

namespace {

const char* const kUsage =
    "usage: greybox_bo <command> [options]\n"
    "commands:\n"
    "  run <config> [--out DIR] [--threads N]   run an experiment (a manifest.txt is a valid config)\n"
    "  summarize <dir> [--target T]             regret statistics over runs under dir\n"
    "  list-problems                            available problems and their surfaces\n"
    "  list-methods                             available methods\n";

int do_run(const std::string& path, const std::optional<std::string>& out_dir, int threads, std::ostream& out,
           std::ostream& err) {
  RunConfig config;
  try {
    Config raw = Config::load(path);
    if (out_dir) raw.set("output.dir", *out_dir);
    config = RunConfig::from_config(raw);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (threads >= 0) set_thread_count(threads);
  const RunResult result = run(config);
  write_run(result, config.output);
  int failed = 0;
  for (const auto& rep : result.replications)
    if (!rep.ok) {
      ++failed;
      err << "replication " << rep.replication << " failed: " << rep.error << "\n";
    }
  out << "wrote " << result.replications.size() << " replication(s) to " << config.output << "\n";
  return failed > 0 ? kExitRuntime : kExitOk;
}

int do_summarize(const std::string& dir, std::optional<double> target, std::ostream& out) {
  const Summary s = summarize(dir, target);
  out << "method,replications,evaluations,final_median_log10_regret";
  if (target) out << ",evaluations_to_target";
  out << "\n";
  for (const auto& [method, rows] : s.by_evaluation) {
    out << method << "," << s.replications.at(method) << "," << rows.size() << ","
        << format_double(rows.back().median);
    if (target) {
      const auto& e = s.to_target.at(method);
      out << "," << (e ? std::to_string(*e) : "never");
    }
    out << "\n";
  }
  return kExitOk;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grey-box Bayesian optimization experiments", "greybox_bo"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  int threads = -1;
  auto* run_cmd = app.add_subcommand("run", "run an experiment");
  run_cmd->add_option("config", config_path, "config or manifest file")->required();
  run_cmd->add_option("--out", out_dir, "output directory (overrides output.dir)");
  run_cmd->add_option("--threads", threads, "worker threads, 0 = all cores");

  std::string summary_dir;
  std::optional<double> target;
  auto* sum_cmd = app.add_subcommand("summarize", "summarize runs");
  sum_cmd->add_option("dir", summary_dir, "directory with manifest.txt files")->required();
  sum_cmd->add_option("--target", target, "regret threshold for evaluations-to-target");

  auto* problems_cmd = app.add_subcommand("list-problems", "list problems");
  auto* methods_cmd = app.add_subcommand("list-methods", "list methods");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << kUsage;
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << kUsage;
    return kExitConfig;
  }

  apply_thread_env();
  try {
    if (run_cmd->parsed()) return do_run(config_path, out_dir, threads, out, err);
    if (sum_cmd->parsed()) return do_summarize(summary_dir, target, out);
    if (problems_cmd->parsed()) {
      for (const auto& p : list_problems())
        out << p.name << "\t" << (p.parameters.empty() ? "-" : p.parameters) << "\t" << p.surfaces << "\n";
      return kExitOk;
    }
    if (methods_cmd->parsed()) {
      for (const auto& m : list_methods()) out << m << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << kUsage;
  return kExitConfig;
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_dispatch(args, std::cout, std::cerr);
}

}  // namespace greybox
