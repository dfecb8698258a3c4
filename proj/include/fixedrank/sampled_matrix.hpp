#pragma once

// Observed entries of a d1 x d2 matrix in sorted coordinate form. The index
// set is shared between copies so S, S_* and W* reuse one pattern.

#include <algorithm>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "fixedrank/linalg.hpp"

namespace fixedrank {

struct SamplePattern {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::vector<int> row_index;  // per entry, nondecreasing
  std::vector<int> col_index;  // per entry, increasing within a row
  std::vector<int> row_ptr;    // rows + 1 offsets into the entry arrays

  std::size_t size() const { return row_index.size(); }
};

template <typename Scalar = double>
struct SampleEntry {
  Eigen::Index row;
  Eigen::Index col;
  Scalar value;
};

template <typename Scalar_ = double>
class SampledMatrix {
 public:
  using Scalar = Scalar_;
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  SampledMatrix() {
    auto p = std::make_shared<SamplePattern>();
    p->row_ptr = {0};
    pattern_ = std::move(p);
  }

  /// Sorts the entries by (row, col); duplicates and out-of-range indices
  /// are rejected.
  SampledMatrix(Eigen::Index rows, Eigen::Index cols, std::vector<SampleEntry<Scalar>> entries) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("SampledMatrix: negative dimension");
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    auto p = std::make_shared<SamplePattern>();
    p->rows = rows;
    p->cols = cols;
    p->row_index.reserve(entries.size());
    p->col_index.reserve(entries.size());
    values_.resize(static_cast<Eigen::Index>(entries.size()));
    for (std::size_t k = 0; k < entries.size(); ++k) {
      const auto& e = entries[k];
      if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols) {
        throw std::out_of_range("SampledMatrix: index out of range");
      }
      if (k > 0 && e.row == entries[k - 1].row && e.col == entries[k - 1].col) {
        throw std::invalid_argument("SampledMatrix: duplicate entry");
      }
      p->row_index.push_back(static_cast<int>(e.row));
      p->col_index.push_back(static_cast<int>(e.col));
      values_(static_cast<Eigen::Index>(k)) = e.value;
    }
    p->row_ptr.assign(static_cast<std::size_t>(rows) + 1, 0);
    for (int i : p->row_index) ++p->row_ptr[static_cast<std::size_t>(i) + 1];
    for (std::size_t i = 1; i < p->row_ptr.size(); ++i) p->row_ptr[i] += p->row_ptr[i - 1];
    pattern_ = std::move(p);
  }

  /// Same index set, new values.
  SampledMatrix with_values(Vector values) const {
    if (values.size() != size()) throw std::invalid_argument("with_values: size mismatch");
    SampledMatrix out;
    out.pattern_ = pattern_;
    out.values_ = std::move(values);
    return out;
  }

  Eigen::Index rows() const { return pattern_->rows; }
  Eigen::Index cols() const { return pattern_->cols; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(pattern_->size()); }
  const SamplePattern& pattern() const { return *pattern_; }
  bool shares_pattern(const SampledMatrix& o) const { return pattern_ == o.pattern_; }
  const Vector& values() const { return values_; }
  Eigen::Index row(Eigen::Index k) const { return pattern_->row_index[static_cast<std::size_t>(k)]; }
  Eigen::Index col(Eigen::Index k) const { return pattern_->col_index[static_cast<std::size_t>(k)]; }

  /// S X for a d2 x k block X.
  Matrix times(const Matrix& x) const {
    if (x.rows() != cols()) throw std::invalid_argument("times: shape mismatch");
    return as_sparse() * x;
  }

  /// S^T Y for a d1 x k block Y.
  Matrix transpose_times(const Matrix& y) const {
    if (y.rows() != rows()) throw std::invalid_argument("transpose_times: shape mismatch");
    return as_sparse().transpose() * y;
  }

  /// Entries of L R^T on the index set, O(|Omega| k).
  Vector sample(const Matrix& l, const Matrix& r) const {
    if (l.rows() != rows() || r.rows() != cols() || l.cols() != r.cols()) {
      throw std::invalid_argument("sample: shape mismatch");
    }
    const Matrix lt = l.transpose();
    const Matrix rt = r.transpose();
    Vector out(size());
    const auto& p = *pattern_;
    for (std::size_t k = 0; k < p.size(); ++k) {
      out(static_cast<Eigen::Index>(k)) = lt.col(p.row_index[k]).dot(rt.col(p.col_index[k]));
    }
    return out;
  }

  Matrix to_dense() const {
    Matrix d = Matrix::Zero(rows(), cols());
    for (Eigen::Index k = 0; k < size(); ++k) d(row(k), col(k)) = values_(k);
    return d;
  }

 private:
  Eigen::Map<const Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>> as_sparse() const {
    const auto& p = *pattern_;
    return {p.rows, p.cols, static_cast<Eigen::Index>(p.size()), p.row_ptr.data(),
            p.col_index.data(), values_.data()};
  }

  std::shared_ptr<const SamplePattern> pattern_;
  Vector values_;
};

}  // namespace fixedrank
