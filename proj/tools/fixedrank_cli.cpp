// fixedrank: generate problems, run solvers, check derivatives, compare runs.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fixedrank/experiment.hpp"
#include "fixedrank/io.hpp"

namespace fs = std::filesystem;
using fixedrank::ExperimentConfig;

namespace {

struct ConfigFlags {
  std::string config_path;
  std::optional<Eigen::Index> d1, d2, rank;
  std::optional<double> oversampling, unbalance;
  std::optional<std::uint64_t> seed;
  std::optional<int> instances;
  std::vector<std::string> geometries, solvers;
  bool euclidean = false;
  bool diagonal = false;
  bool no_time = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app->add_option("--d1", d1, "rows");
    app->add_option("--d2", d2, "columns");
    app->add_option("-r,--rank", rank, "rank");
    app->add_option("--os", oversampling, "oversampling factor");
    app->add_option("--seed", seed, "base seed");
    app->add_option("--instances", instances, "number of random instances");
    app->add_option("--geometry", geometries, "geometries to run")->delimiter(',');
    app->add_option("--solver", solvers, "solvers to run (gd, tr)")->delimiter(',');
    app->add_option("--unbalance", unbalance, "start fullrank at (G/c, H c)");
    app->add_flag("--euclidean-ablation", euclidean, "add the Euclidean-metric variants");
    app->add_flag("--diagonal-ablation", diagonal, "add the diagonal-B variant");
    app->add_flag("--no-time", no_time, "write time_s = 0 so traces are reproducible");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      c = ExperimentConfig::from_json(nlohmann::json::parse(in));
    }
    if (d1) c.d1 = *d1;
    if (d2) c.d2 = *d2;
    if (rank) c.rank = *rank;
    if (oversampling) c.oversampling = *oversampling;
    if (seed) c.seed = *seed;
    if (instances) c.instances = *instances;
    if (unbalance) c.unbalance = *unbalance;
    if (!geometries.empty()) c.geometries = geometries;
    if (!solvers.empty()) c.solvers = solvers;
    if (euclidean) c.euclidean_ablation = true;
    if (diagonal) c.diagonal_ablation = true;
    if (no_time) c.record_time = false;
    c.validate();
    return c;
  }
};

int cmd_generate(const ConfigFlags& flags, const fs::path& out) {
  const auto config = flags.resolve();
  fs::create_directories(out);
  std::ofstream(out / "config.json") << config.to_json().dump(2) << '\n';
  for (int k = 0; k < config.instances; ++k) {
    const auto problem = fixedrank::generate_problem(config, k);
    fixedrank::write_problem(out / ("instance_" + std::to_string(k)), problem);
    std::cout << "instance_" << k << ": " << problem.train.size() << " training entries";
    if (problem.test) std::cout << ", " << problem.test->size() << " test entries";
    std::cout << '\n';
  }
  return 0;
}

int cmd_run(const ConfigFlags& flags, const fs::path& out, int threads) {
  const auto config = flags.resolve();
  if (threads <= 0) threads = fixedrank::thread_count_from_env();
  const auto summary = fixedrank::run_experiment(config, out, threads);
  int failures = 0;
  for (const auto& r : summary.runs) {
    std::printf("instance %d %-20s %-3s %-10s iters %4d  cost %.3e  rmse %.3e%s%s\n", r.instance,
                r.geometry.c_str(), r.solver.c_str(), r.stop_reason.c_str(), r.iterations,
                r.final_cost, r.test_rmse, r.ok ? "" : "  error: ", r.error.c_str());
    failures += r.ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}

int cmd_check(const ConfigFlags& flags, const std::string& problem_dir, std::uint64_t seed,
              bool at_start) {
  const auto config = flags.resolve();
  const auto problem = problem_dir.empty() ? fixedrank::generate_problem(config, 0)
                                           : fixedrank::read_problem(problem_dir);
  fixedrank::CheckOptions options;
  options.seed = seed;
  options.at_converged = !at_start;
  nlohmann::json reports = nlohmann::json::array();
  bool all_passed = true;
  for (const auto& g : config.geometry_list()) {
    const auto report = fixedrank::check_geometry(problem, g, options);
    all_passed = all_passed && report.passed();
    reports.push_back(fixedrank::to_json(report));
  }
  std::cout << reports.dump(2) << '\n';
  return all_passed ? 0 : 1;
}

int cmd_compare(const fs::path& dir, double target) {
  std::cout << fixedrank::format_comparison(fixedrank::compare_geometries(dir, target), target);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-rank matrix completion on quotient and embedded geometries"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, run_flags, check_flags;
  std::string gen_out = "problems", run_out = "runs", problem_dir, compare_dir;
  int threads = 0;
  std::uint64_t check_seed = 1;
  bool at_start = false;
  double target = 1e-6;

  auto* gen = app.add_subcommand("generate", "write random problem instances as MatrixMarket files");
  gen_flags.attach(gen);
  gen->add_option("-o,--out", gen_out, "output directory");

  auto* run = app.add_subcommand("run", "run every geometry and solver on every instance");
  run_flags.attach(run);
  run->add_option("-o,--out", run_out, "output directory");
  run->add_option("--threads", threads, "worker threads (default: FIXEDRANK_THREADS or all cores)");

  auto* check = app.add_subcommand("check", "gradient, Hessian and projection checks as JSON");
  check_flags.attach(check);
  check->add_option("--problem", problem_dir, "problem directory from 'generate'");
  check->add_option("--check-seed", check_seed, "seed for probe directions");
  check->add_flag("--at-start", at_start, "check the Hessian at the start instead of after a solve");

  auto* compare = app.add_subcommand("compare", "iterations to a cost level for each run");
  compare->add_option("dir", compare_dir, "output directory of 'run'")->required();
  compare->add_option("--target", target, "cost level");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_generate(gen_flags, gen_out);
    if (*run) return cmd_run(run_flags, run_out, threads);
    if (*check) return cmd_check(check_flags, problem_dir, check_seed, at_start);
    if (*compare) return cmd_compare(compare_dir, target);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
