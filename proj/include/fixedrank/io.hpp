#pragma once

// File formats: MatrixMarket coordinate files for sampled matrices, array
// files for dense factors, factor checkpoints with a JSON manifest, solver
// traces as CSV and diagnostics reports as JSON.

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "fixedrank/diagnostics.hpp"
#include "fixedrank/sampled_matrix.hpp"
#include "fixedrank/solvers.hpp"

namespace fixedrank {

/// Malformed input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

SampledMatrix<double> read_matrix_market(const std::filesystem::path& path);
void write_matrix_market(const std::filesystem::path& path, const SampledMatrix<double>& m);

Eigen::MatrixXd read_dense_matrix_market(const std::filesystem::path& path);
void write_dense_matrix_market(const std::filesystem::path& path, const Eigen::MatrixXd& m);

struct Checkpoint {
  std::string geometry;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  Eigen::Index rank = 0;
  std::vector<Eigen::MatrixXd> factors;
};

/// Writes factor_<k>.mtx files and manifest.json into `dir`.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

void write_trace_csv(const std::filesystem::path& path, const SolverTrace& trace);
/// Rejects files whose header differs from SolverTrace::kHeader.
SolverTrace read_trace_csv(const std::filesystem::path& path);

nlohmann::json to_json(const DiagnosticsReport& report);

}  // namespace fixedrank
