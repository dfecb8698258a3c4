#include "fixedrank/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace fixedrank {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Reads the banner, skips comments and returns the first data line.
std::string read_header(std::istream& in, const std::string& format, const std::string& where) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
    throw FormatError(where + ": missing MatrixMarket banner");
  }
  std::istringstream banner(line);
  std::string tag, object, fmt, field, symmetry;
  banner >> tag >> object >> fmt >> field >> symmetry;
  if (object != "matrix" || fmt != format || field != "real" || symmetry != "general") {
    throw FormatError(where + ": expected 'matrix " + format + " real general'");
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') return line;
  }
  throw FormatError(where + ": missing size line");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SampledMatrix<double> read_matrix_market(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::istringstream size(read_header(in, "coordinate", path.string()));
  long long rows = 0, cols = 0, nnz = 0;
  if (!(size >> rows >> cols >> nnz) || rows < 0 || cols < 0 || nnz < 0) {
    throw FormatError(path.string() + ": bad size line");
  }
  std::vector<SampleEntry<double>> entries;
  entries.reserve(static_cast<std::size_t>(nnz));
  for (long long k = 0; k < nnz; ++k) {
    long long i = 0, j = 0;
    double v = 0;
    if (!(in >> i >> j >> v)) throw FormatError(path.string() + ": truncated entry list");
    entries.push_back({static_cast<Eigen::Index>(i - 1), static_cast<Eigen::Index>(j - 1), v});
  }
  return SampledMatrix<double>(rows, cols, std::move(entries));
}

void write_matrix_market(const std::filesystem::path& path, const SampledMatrix<double>& m) {
  auto out = open_out(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << ' ' << m.cols() << ' ' << m.size() << '\n';
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    out << m.row(k) + 1 << ' ' << m.col(k) + 1 << ' ' << format_double(m.values()(k)) << '\n';
  }
}

Eigen::MatrixXd read_dense_matrix_market(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::istringstream size(read_header(in, "array", path.string()));
  long long rows = 0, cols = 0;
  if (!(size >> rows >> cols) || rows < 0 || cols < 0) {
    throw FormatError(path.string() + ": bad size line");
  }
  Eigen::MatrixXd m(rows, cols);
  for (long long j = 0; j < cols; ++j) {
    for (long long i = 0; i < rows; ++i) {
      if (!(in >> m(i, j))) throw FormatError(path.string() + ": truncated array");
    }
  }
  return m;
}

void write_dense_matrix_market(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  auto out = open_out(path);
  out << "%%MatrixMarket matrix array real general\n";
  out << m.rows() << ' ' << m.cols() << '\n';
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) out << format_double(m(i, j)) << '\n';
  }
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["geometry"] = checkpoint.geometry;
  manifest["rows"] = checkpoint.rows;
  manifest["cols"] = checkpoint.cols;
  manifest["rank"] = checkpoint.rank;
  manifest["factors"] = nlohmann::json::array();
  for (std::size_t k = 0; k < checkpoint.factors.size(); ++k) {
    const std::string file = "factor_" + std::to_string(k) + ".mtx";
    write_dense_matrix_market(dir / file, checkpoint.factors[k]);
    manifest["factors"].push_back({{"file", file},
                                   {"rows", checkpoint.factors[k].rows()},
                                   {"cols", checkpoint.factors[k].cols()}});
  }
  open_out(dir / "manifest.json") << manifest.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(open_in(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  Checkpoint c;
  c.geometry = manifest.at("geometry").get<std::string>();
  c.rows = manifest.at("rows").get<Eigen::Index>();
  c.cols = manifest.at("cols").get<Eigen::Index>();
  c.rank = manifest.at("rank").get<Eigen::Index>();
  for (const auto& f : manifest.at("factors")) {
    auto m = read_dense_matrix_market(dir / f.at("file").get<std::string>());
    if (m.rows() != f.at("rows").get<Eigen::Index>() || m.cols() != f.at("cols").get<Eigen::Index>()) {
      throw FormatError(dir.string() + ": factor shape disagrees with manifest");
    }
    c.factors.push_back(std::move(m));
  }
  return c;
}

void write_trace_csv(const std::filesystem::path& path, const SolverTrace& trace) {
  auto out = open_out(path);
  trace.write_csv(out);
}

SolverTrace read_trace_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != SolverTrace::kHeader) {
    throw FormatError(path.string() + ": unexpected trace header");
  }
  SolverTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw FormatError(path.string() + ": malformed row '" + line + "'");
    TraceRow r;
    try {
      r.iter = std::stoi(cells[0]);
      r.cost = std::stod(cells[1]);
      r.grad_norm = std::stod(cells[2]);
      r.step_or_radius = std::stod(cells[3]);
      r.backtracks = std::stoi(cells[4]);
      r.inner_iters = std::stoi(cells[5]);
      r.rho = cells[6] == "nan" || cells[6] == "-nan" ? std::numeric_limits<double>::quiet_NaN()
                                                      : std::stod(cells[6]);
      r.time_s = std::stod(cells[7]);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": malformed row '" + line + "'");
    }
    trace.rows.push_back(r);
  }
  return trace;
}

namespace {
nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

nlohmann::json to_json(const TaylorFit& fit) {
  nlohmann::json j;
  j["steps"] = fit.steps;
  j["residuals"] = fit.residuals;
  j["slope"] = finite_or_null(fit.slope);
  j["points_used"] = fit.points_used;
  j["below_floor"] = fit.below_floor;
  return j;
}
}  // namespace

nlohmann::json to_json(const DiagnosticsReport& report) {
  nlohmann::json j;
  j["geometry"] = report.geometry;
  j["cost"] = finite_or_null(report.cost);
  if (report.gradient) j["gradient"] = to_json(*report.gradient);
  if (report.hessian) j["hessian"] = to_json(*report.hessian);
  if (report.symmetry_defect) j["symmetry_defect"] = *report.symmetry_defect;
  if (report.idempotence_defect) j["idempotence_defect"] = *report.idempotence_defect;
  if (report.vertical_defect) j["vertical_defect"] = *report.vertical_defect;
  if (report.orthogonality_defect) j["orthogonality_defect"] = *report.orthogonality_defect;
  j["gradient_pass"] = report.gradient_pass;
  j["hessian_pass"] = report.hessian_pass;
  j["projection_pass"] = report.projection_pass;
  j["passed"] = report.passed();
  return j;
}

}  // namespace fixedrank
