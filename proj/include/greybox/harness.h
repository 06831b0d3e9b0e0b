#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "greybox/config.h"
#include "greybox/kernel.h"
#include "greybox/mogp.h"
#include "greybox/problems.h"
#include "greybox/trace.h"

namespace greybox {

extern const char* const kLibraryVersion;

enum class Method { Random, EiBb, KgBb, EiCf, KgCf, MfKg, ConstituentKg };

std::string to_string(Method m);
Method method_from_string(const std::string& name);
std::vector<std::string> list_methods();

enum class BudgetUnit { Evaluations, Cost };

/// Fully resolved experiment configuration (see README for the key list).
struct RunConfig {
  std::string problem = "square_scalar";
  std::map<std::string, std::string> problem_params;
  double observation_noise = 0.0;  ///< variance of Gaussian noise added to observations

  Method method = Method::EiBb;
  double budget = 10;
  BudgetUnit budget_unit = BudgetUnit::Evaluations;
  int replications = 1;
  std::uint64_t seed = 0;
  std::string output = "out";
  int design_size = -1;  ///< -1: 2(d+1)

  KernelFamily kernel = KernelFamily::Matern52;
  int refit_every = 1;
  int fit_restarts = 8;
  int fit_iterations = 200;
  bool fit_noise = false;
  std::optional<MultiOutputVariant> mo_variant;  ///< default depends on the method

  int samples = 128;        ///< fixed draws for SAA / one-shot
  int rank_samples = 4096;  ///< fresh draws for ranking restart endpoints
  std::string kg_strategy = "discretized";
  int kg_points_per_dim = 100;
  int fantasy_restarts = 20;
  std::string acq_optimizer = "saa";
  bool cost_normalize = false;  ///< constituent-kg only
  std::string cost_model = "known";
  int kgcf_outer = 8;
  int kgcf_inner = 32;
  int kgcf_candidates = 64;

  int opt_restarts = 10;
  int opt_iterations = 200;
  int max_one_shot_dimension = 4096;

  bool record_hyperparameters = false;

  /// Parses and validates, including method/problem compatibility. Throws ConfigError.
  static RunConfig from_config(const Config& config);
  Config to_config() const;
};

struct ReplicationResult {
  int replication = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::vector<TraceRow> rows;
  std::vector<double> wall_ms;             ///< per row
  std::vector<std::string> hyperparameters; ///< per fit: "iteration,params"
};

struct RunResult {
  Config manifest;
  std::vector<ReplicationResult> replications;
};

/// Runs every replication (in parallel across replications).
RunResult run(const RunConfig& config);
ReplicationResult run_replication(const RunConfig& config, const Problem& problem, int replication);
/// Writes manifest.txt, trace_rNNN.csv, timing_rNNN.csv (and hyper_rNNN.csv) into dir.
void write_run(const RunResult& result, const std::string& dir);
std::string trace_file_name(int replication);

/// Uniform random search on the full surface.
std::vector<TraceRow> random_search(const Problem& problem, double budget, BudgetUnit unit,
                                    std::uint64_t seed, int replication = 0);

/// FNV-1a checksum of the problem's outputs at fixed probe points.
std::uint64_t oracle_checksum(const Problem& problem);

/// Problem construction from a RunConfig.
Problem build_problem(const RunConfig& config);

}  // namespace greybox
