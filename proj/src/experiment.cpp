#include "fixedrank/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "fixedrank/io.hpp"

namespace fixedrank {

namespace fs = std::filesystem;
using json = nlohmann::json;

const std::vector<std::string>& known_geometries() {
  static const std::vector<std::string> names{"fullrank", "fullrank-euclidean", "polar",
                                              "polar-diagonal", "subspace", "subspace-euclidean",
                                              "embedded"};
  return names;
}

const std::vector<std::string>& known_solvers() {
  static const std::vector<std::string> names{"gd", "tr"};
  return names;
}

namespace {

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

template <typename F>
decltype(auto) with_geometry(const std::string& name, F&& f) {
  if (name == "fullrank") return f(FullRankGeometry<double>(MetricMode::ScaleInvariant));
  if (name == "fullrank-euclidean") return f(FullRankGeometry<double>(MetricMode::Euclidean));
  if (name == "polar") return f(PolarGeometry<double>(ScalingMode::Spd));
  if (name == "polar-diagonal") return f(PolarGeometry<double>(ScalingMode::Diagonal));
  if (name == "subspace") return f(SubspaceGeometry<double>(MetricMode::ScaleInvariant));
  if (name == "subspace-euclidean") return f(SubspaceGeometry<double>(MetricMode::Euclidean));
  if (name == "embedded") return f(EmbeddedGeometry<double>());
  throw std::invalid_argument("unknown geometry '" + name + "'");
}

json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (d1 < 1 || d2 < 1) throw std::invalid_argument("config: d1 and d2 must be positive");
  if (rank < 1 || rank > std::min(d1, d2)) {
    throw std::invalid_argument("config: rank must lie in [1, min(d1, d2)]");
  }
  if (!(oversampling > 0)) throw std::invalid_argument("config: oversampling must be positive");
  if (instances < 1) throw std::invalid_argument("config: instances must be at least 1");
  if (!(unbalance > 0)) throw std::invalid_argument("config: unbalance must be positive");
  if (gd_max_iters < 0 || tr_max_outer < 0 || tr_max_inner < 1) {
    throw std::invalid_argument("config: iteration limits out of range");
  }
  for (const auto& g : geometries) {
    if (!contains(known_geometries(), g)) throw std::invalid_argument("config: unknown geometry '" + g + "'");
  }
  for (const auto& s : solvers) {
    if (!contains(known_solvers(), s)) throw std::invalid_argument("config: unknown solver '" + s + "'");
  }
  const auto n = sample_count(d1, d2, rank, oversampling);
  const auto total = static_cast<double>(d1) * static_cast<double>(d2);
  if (static_cast<double>(n) > total) {
    throw std::invalid_argument("config: more samples requested than matrix entries");
  }
}

std::vector<std::string> ExperimentConfig::geometry_list() const {
  std::vector<std::string> out;
  auto add = [&](const std::string& g) {
    if (!contains(out, g)) out.push_back(g);
  };
  for (const auto& g : geometries) add(g);
  if (euclidean_ablation) {
    add("fullrank-euclidean");
    add("subspace-euclidean");
  }
  if (diagonal_ablation) add("polar-diagonal");
  return out;
}

json ExperimentConfig::to_json() const {
  return {{"d1", d1},
          {"d2", d2},
          {"rank", rank},
          {"oversampling", oversampling},
          {"seed", seed},
          {"instances", instances},
          {"geometries", geometries},
          {"solvers", solvers},
          {"euclidean_ablation", euclidean_ablation},
          {"diagonal_ablation", diagonal_ablation},
          {"with_test", with_test},
          {"unbalance", unbalance},
          {"gd_max_iters", gd_max_iters},
          {"tr_max_outer", tr_max_outer},
          {"tr_max_inner", tr_max_inner},
          {"cost_stop", cost_stop},
          {"grad_norm_stop", grad_norm_stop},
          {"record_time", record_time}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("config: expected a JSON object");
  ExperimentConfig c;
  const json defaults = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("d1", c.d1);
    get("d2", c.d2);
    get("rank", c.rank);
    get("oversampling", c.oversampling);
    get("seed", c.seed);
    get("instances", c.instances);
    get("geometries", c.geometries);
    get("solvers", c.solvers);
    get("euclidean_ablation", c.euclidean_ablation);
    get("diagonal_ablation", c.diagonal_ablation);
    get("with_test", c.with_test);
    get("unbalance", c.unbalance);
    get("gd_max_iters", c.gd_max_iters);
    get("tr_max_outer", c.tr_max_outer);
    get("tr_max_inner", c.tr_max_inner);
    get("cost_stop", c.cost_stop);
    get("grad_norm_stop", c.grad_norm_stop);
    get("record_time", c.record_time);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + (stream + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Eigen::Index sample_count(Eigen::Index d1, Eigen::Index d2, Eigen::Index r, double oversampling) {
  return static_cast<Eigen::Index>(
      std::llround(oversampling * static_cast<double>(d1 + d2 - r) * static_cast<double>(r)));
}

CompletionProblem<double> generate_problem(const ExperimentConfig& config, int instance) {
  config.validate();
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(instance)));
  const Eigen::MatrixXd a = gaussian_matrix<double>(config.d1, config.rank, rng);
  const Eigen::MatrixXd b = gaussian_matrix<double>(config.d2, config.rank, rng);

  const auto n = static_cast<std::uint64_t>(sample_count(config.d1, config.d2, config.rank,
                                                         config.oversampling));
  const std::uint64_t total = static_cast<std::uint64_t>(config.d1) * static_cast<std::uint64_t>(config.d2);
  const std::uint64_t n_test = config.with_test ? std::min(n, total - n) : 0;
  const std::uint64_t k = n + n_test;

  // Floyd's algorithm: k distinct linear indices out of `total`.
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(static_cast<std::size_t>(k));
  std::vector<std::uint64_t> picks;
  picks.reserve(static_cast<std::size_t>(k));
  for (std::uint64_t j = total - k; j < total; ++j) {
    std::uniform_int_distribution<std::uint64_t> pick(0, j);
    const std::uint64_t t = pick(rng);
    const std::uint64_t v = chosen.insert(t).second ? t : j;
    if (v == j) chosen.insert(j);
    picks.push_back(v);
  }
  std::sort(picks.begin(), picks.end());
  std::shuffle(picks.begin(), picks.end(), rng);

  auto build = [&](std::size_t from, std::size_t to) {
    std::vector<SampleEntry<double>> entries;
    entries.reserve(to - from);
    for (std::size_t p = from; p < to; ++p) {
      const auto i = static_cast<Eigen::Index>(picks[p] / static_cast<std::uint64_t>(config.d2));
      const auto j = static_cast<Eigen::Index>(picks[p] % static_cast<std::uint64_t>(config.d2));
      entries.push_back({i, j, a.row(i).dot(b.row(j))});
    }
    return SampledMatrix<double>(config.d1, config.d2, std::move(entries));
  };

  CompletionProblem<double> problem;
  problem.rank = config.rank;
  problem.train = build(0, static_cast<std::size_t>(n));
  if (n_test > 0) problem.test = build(static_cast<std::size_t>(n), static_cast<std::size_t>(k));
  return problem;
}

void write_problem(const fs::path& dir, const CompletionProblem<double>& problem) {
  fs::create_directories(dir);
  write_matrix_market(dir / "train.mtx", problem.train);
  if (problem.test) write_matrix_market(dir / "test.mtx", *problem.test);
  std::ofstream(dir / "problem.json") << json{{"rank", problem.rank}}.dump(2) << '\n';
}

CompletionProblem<double> read_problem(const fs::path& dir) {
  std::ifstream in(dir / "problem.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "problem.json").string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError((dir / "problem.json").string() + ": " + e.what());
  }
  CompletionProblem<double> problem;
  problem.rank = meta.at("rank").get<Eigen::Index>();
  problem.train = read_matrix_market(dir / "train.mtx");
  if (fs::exists(dir / "test.mtx")) problem.test = read_matrix_market(dir / "test.mtx");
  return problem;
}

json RunRecord::to_json() const {
  return {{"instance", instance},
          {"geometry", geometry},
          {"solver", solver},
          {"ok", ok},
          {"error", error},
          {"stop_reason", stop_reason},
          {"s0", finite_or_null(s0)},
          {"delta0", finite_or_null(delta0)},
          {"delta_bar", finite_or_null(delta_bar)},
          {"initial_cost", finite_or_null(initial_cost)},
          {"final_cost", finite_or_null(final_cost)},
          {"test_rmse", finite_or_null(test_rmse)},
          {"iterations", iterations},
          {"iterations_to_1e-6", iterations_to_1e6},
          {"wall_time_s", wall_time_s}};
}

json ExperimentSummary::to_json() const {
  json runs_json = json::array();
  for (const auto& r : runs) runs_json.push_back(r.to_json());
  return {{"config", config.to_json()}, {"runs", runs_json}};
}

namespace {

template <GeometryContract G>
typename G::Point starting_point(const G& geo, const CompletionProblem<double>& problem,
                                 double unbalance) {
  auto x0 = init_spectral(geo, problem);
  if constexpr (std::is_same_v<G, FullRankGeometry<double>>) {
    if (unbalance != 1.0) {
      x0[0] /= unbalance;
      x0[1] *= unbalance;
    }
  }
  return x0;
}

template <GeometryContract G>
void solve(const G& geo, const ExperimentConfig& config, const CompletionProblem<double>& problem,
           const std::string& solver, RunRecord& record) {
  const CompletionCost<G> cost(geo, problem);
  const auto objective = make_objective(geo, cost);
  const auto x0 = starting_point(geo, problem, config.unbalance);
  const auto m0 = objective.evaluate(x0);
  record.initial_cost = double(m0.cost);
  const bool stationary = !(m0.gradient_norm > 0);
  record.s0 = stationary ? 1.0 : double(linearized_step(geo, x0, -m0.gradient, problem));

  SolverResult<G> result;
  try {
    if (solver == "gd") {
      GDConfig gd;
      gd.max_iters = config.gd_max_iters;
      gd.cost_stop = config.cost_stop;
      gd.grad_norm_stop = config.grad_norm_stop;
      gd.initial_step = record.s0;
      gd.record_time = config.record_time;
      result = gradient_descent(geo, objective, x0, gd);
    } else {
      TRConfig tr;
      tr.max_outer = config.tr_max_outer;
      tr.max_inner = config.tr_max_inner;
      tr.cost_stop = config.cost_stop;
      tr.grad_norm_stop = config.grad_norm_stop;
      tr.record_time = config.record_time;
      if (!stationary) {
        const auto seed = tr_radius_seed(record.s0, double(m0.gradient_norm));
        record.delta0 = seed.initial;
        record.delta_bar = seed.maximum;
        tr.initial_radius = seed.initial;
        tr.max_radius = seed.maximum;
      }
      result = trust_region(geo, objective, x0, tr);
    }
  } catch (const SolverError& e) {
    record.trace = e.trace();
    record.error = e.what();
    record.stop_reason = "error";
    if (!record.trace.rows.empty()) record.final_cost = record.trace.rows.back().cost;
    record.iterations = record.trace.iterations();
    record.iterations_to_1e6 = record.trace.iterations_to(1e-6);
    return;
  }
  record.trace = std::move(result.trace);
  record.ok = true;
  record.stop_reason = record.trace.stop_reason;
  record.final_cost = record.trace.rows.back().cost;
  record.iterations = record.trace.iterations();
  record.iterations_to_1e6 = record.trace.iterations_to(1e-6);
  record.test_rmse = double(test_rmse(geo, result.x, problem));
}

}  // namespace

RunRecord run_single(const ExperimentConfig& config, const CompletionProblem<double>& problem,
                     const std::string& geometry, const std::string& solver, int instance) {
  if (!contains(known_solvers(), solver)) throw std::invalid_argument("unknown solver '" + solver + "'");
  RunRecord record;
  record.instance = instance;
  record.geometry = geometry;
  record.solver = solver;
  record.test_rmse = std::numeric_limits<double>::quiet_NaN();
  const auto start = std::chrono::steady_clock::now();
  try {
    with_geometry(geometry, [&](const auto& geo) { solve(geo, config, problem, solver, record); });
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception& e) {
    record.ok = false;
    record.error = e.what();
    record.stop_reason = "error";
  }
  if (config.record_time) {
    record.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
  return record;
}

DiagnosticsReport check_geometry(const CompletionProblem<double>& problem, const std::string& geometry,
                                 const CheckOptions& options) {
  return with_geometry(geometry, [&](const auto& geo) {
    using G = std::decay_t<decltype(geo)>;
    const CompletionCost<G> cost(geo, problem);
    const auto objective = make_objective(geo, cost);
    const auto x0 = init_spectral(geo, problem);
    auto report = check_gradient(geo, objective, x0, derive_seed(options.seed, 0), options.diagnostics);

    auto x = x0;
    if (options.at_converged) {
      const auto m0 = objective.evaluate(x0);
      const double s0 = double(linearized_step(geo, x0, -m0.gradient, problem));
      const auto seed = tr_radius_seed(s0, double(m0.gradient_norm));
      TRConfig tr;
      tr.max_outer = options.tr_max_outer;
      tr.initial_radius = seed.initial;
      tr.max_radius = seed.maximum;
      tr.record_time = false;
      x = trust_region(geo, objective, x0, tr).x;
    }
    const auto hess = check_hessian(geo, objective, x, derive_seed(options.seed, 1), options.diagnostics);
    const auto proj = check_projections(geo, x, derive_seed(options.seed, 2), options.diagnostics);
    report.hessian = hess.hessian;
    report.symmetry_defect = hess.symmetry_defect;
    report.hessian_pass = hess.hessian_pass;
    report.idempotence_defect = proj.idempotence_defect;
    report.vertical_defect = proj.vertical_defect;
    report.orthogonality_defect = proj.orthogonality_defect;
    report.projection_pass = proj.projection_pass;
    return report;
  });
}

int thread_count_from_env() {
  if (const char* env = std::getenv("FIXEDRANK_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 const std::optional<fs::path>& out_dir, int threads) {
  config.validate();
  ExperimentSummary summary{config, {}};
  const auto geometries = config.geometry_list();

  std::vector<CompletionProblem<double>> problems;
  for (int k = 0; k < config.instances; ++k) problems.push_back(generate_problem(config, k));

  struct Task {
    int instance;
    std::string geometry;
    std::string solver;
  };
  std::vector<Task> tasks;
  for (int k = 0; k < config.instances; ++k) {
    for (const auto& g : geometries) {
      for (const auto& s : config.solvers) tasks.push_back({k, g, s});
    }
  }

  summary.runs.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      const auto& t = tasks[i];
      summary.runs[i] = run_single(config, problems[static_cast<std::size_t>(t.instance)],
                                   t.geometry, t.solver, t.instance);
    }
  };
  const int n_workers = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(tasks.size(), 1)));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }

  if (out_dir) {
    fs::create_directories(*out_dir);
    for (const auto& r : summary.runs) {
      const auto dir = *out_dir / ("instance_" + std::to_string(r.instance));
      write_trace_csv(dir / (r.geometry + "_" + r.solver + ".csv"), r.trace);
    }
    std::ofstream(*out_dir / "summary.json") << summary.to_json().dump(2) << '\n';
  }
  return summary;
}

std::vector<ComparisonRow> compare_geometries(const fs::path& dir, double target) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  using Key = std::tuple<int, std::string, std::string>;
  std::set<Key> expected;

  const auto summary_path = dir / "summary.json";
  if (fs::exists(summary_path)) {
    std::ifstream in(summary_path);
    json summary;
    try {
      summary = json::parse(in);
    } catch (const json::exception& e) {
      throw FormatError(summary_path.string() + ": " + e.what());
    }
    for (const auto& r : summary.at("runs")) {
      expected.insert({r.at("instance").get<int>(), r.at("geometry").get<std::string>(),
                       r.at("solver").get<std::string>()});
    }
  } else {
    std::set<int> instances;
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (!entry.is_directory() || name.rfind("instance_", 0) != 0) continue;
      const int k = std::stoi(name.substr(9));
      instances.insert(k);
      for (const auto& f : fs::directory_iterator(entry.path())) {
        if (f.path().extension() != ".csv") continue;
        const auto stem = f.path().stem().string();
        const auto cut = stem.rfind('_');
        if (cut == std::string::npos) continue;
        pairs.insert({stem.substr(0, cut), stem.substr(cut + 1)});
      }
    }
    for (int k : instances) {
      for (const auto& [g, s] : pairs) expected.insert({k, g, s});
    }
  }

  std::vector<ComparisonRow> rows;
  for (const auto& [k, g, s] : expected) {
    ComparisonRow row{k, g, s};
    const auto path = dir / ("instance_" + std::to_string(k)) / (g + "_" + s + ".csv");
    if (fs::exists(path)) {
      const auto trace = read_trace_csv(path);
      if (!trace.rows.empty()) {
        row.present = true;
        row.iterations = trace.iterations();
        row.iterations_to_target = trace.iterations_to(target);
        row.final_cost = trace.rows.back().cost;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_comparison(const std::vector<ComparisonRow>& rows, double target) {
  std::ostringstream out;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", target);
  out << "instance,geometry,solver,status,iterations_to_" << buf << ",iterations,final_cost\n";
  for (const auto& r : rows) {
    out << r.instance << ',' << r.geometry << ',' << r.solver << ',';
    if (!r.present) {
      out << "absent,,,\n";
      continue;
    }
    std::snprintf(buf, sizeof buf, "%.6e", r.final_cost);
    out << "ok," << r.iterations_to_target << ',' << r.iterations << ',' << buf << '\n';
  }
  return out.str();
}

}  // namespace fixedrank
