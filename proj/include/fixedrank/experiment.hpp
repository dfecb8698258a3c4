#pragma once

// Seeded problem generation, (geometry, solver) runs over several instances
// with a worker pool, and comparison of the resulting traces.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixedrank/completion.hpp"
#include "fixedrank/diagnostics.hpp"
#include "fixedrank/solvers.hpp"

namespace fixedrank {

/// Geometry names accepted by the harness.
const std::vector<std::string>& known_geometries();
const std::vector<std::string>& known_solvers();

struct ExperimentConfig {
  Eigen::Index d1 = 100;
  Eigen::Index d2 = 120;
  Eigen::Index rank = 3;
  double oversampling = 6.0;
  std::uint64_t seed = 1;
  int instances = 5;
  std::vector<std::string> geometries{"fullrank", "polar", "subspace", "embedded"};
  std::vector<std::string> solvers{"gd", "tr"};
  bool euclidean_ablation = false;  // adds fullrank-euclidean and subspace-euclidean
  bool diagonal_ablation = false;   // adds polar-diagonal
  bool with_test = true;
  double unbalance = 1.0;  // fullrank start moved along its fiber to (G/c, H c)
  int gd_max_iters = 200;
  int tr_max_outer = 100;
  int tr_max_inner = 100;
  double cost_stop = 1e-20;
  double grad_norm_stop = 1e-12;
  bool record_time = true;

  void validate() const;
  /// The geometry list with the ablation variants appended, duplicates removed.
  std::vector<std::string> geometry_list() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Child seed number `stream` of `base` (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// round(OS (d1 + d2 - r) r).
Eigen::Index sample_count(Eigen::Index d1, Eigen::Index d2, Eigen::Index r, double oversampling);

/// W* = A B^T with standard Gaussian A, B; |Omega| entries drawn uniformly
/// without replacement, plus a disjoint test set of min(|Omega|, d1 d2 - |Omega|)
/// entries when requested. Instance k of a config is reproducible on its own.
CompletionProblem<double> generate_problem(const ExperimentConfig& config, int instance = 0);

void write_problem(const std::filesystem::path& dir, const CompletionProblem<double>& problem);
CompletionProblem<double> read_problem(const std::filesystem::path& dir);

struct RunRecord {
  int instance = 0;
  std::string geometry;
  std::string solver;
  bool ok = false;
  std::string error;
  std::string stop_reason;
  double s0 = 0;
  double delta0 = 0;
  double delta_bar = 0;
  double initial_cost = 0;
  double final_cost = 0;
  double test_rmse = 0;
  int iterations = 0;
  int iterations_to_1e6 = -1;
  double wall_time_s = 0;
  SolverTrace trace;

  nlohmann::json to_json() const;
};

/// Spectral start, linearized step seeds, then one solver run.
RunRecord run_single(const ExperimentConfig& config, const CompletionProblem<double>& problem,
                     const std::string& geometry, const std::string& solver, int instance = 0);

struct CheckOptions {
  std::uint64_t seed = 1;
  bool at_converged = true;  // Hessian and projection checks after a trust-region solve
  int tr_max_outer = 100;
  DiagnosticsOptions diagnostics;
};

/// Gradient Taylor test at the spectral start; Hessian symmetry, Hessian
/// Taylor test and projection defects at the trust-region limit point (or at
/// the start when `at_converged` is false).
DiagnosticsReport check_geometry(const CompletionProblem<double>& problem, const std::string& geometry,
                                 const CheckOptions& options = {});

struct ExperimentSummary {
  ExperimentConfig config;
  std::vector<RunRecord> runs;  // ordered by instance, geometry, solver

  nlohmann::json to_json() const;
};

/// FIXEDRANK_THREADS if set and positive, else the hardware concurrency.
int thread_count_from_env();

/// Runs every (instance, geometry, solver) triple on `threads` workers and,
/// when `out_dir` is set, writes instance_<k>/<geometry>_<solver>.csv and
/// summary.json.
ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 const std::optional<std::filesystem::path>& out_dir, int threads);

struct ComparisonRow {
  int instance = 0;
  std::string geometry;
  std::string solver;
  bool present = false;
  int iterations_to_target = -1;
  int iterations = 0;
  double final_cost = 0;
};

/// One row per expected (instance, geometry, solver). The expected set comes
/// from summary.json when present, else from the union of trace files found.
std::vector<ComparisonRow> compare_geometries(const std::filesystem::path& dir, double target = 1e-6);
std::string format_comparison(const std::vector<ComparisonRow>& rows, double target = 1e-6);

}  // namespace fixedrank
