#include "magsim/csr.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "magsim/errors.hpp"

namespace magsim {

CsrMatrix::CsrMatrix(std::size_t num_rows, std::size_t num_cols, std::vector<std::size_t> row_offsets,
                     std::vector<std::size_t> col_indices, std::vector<double> values, Normalization norm)
    : num_rows_(num_rows),
      num_cols_(num_cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)),
      norm_(norm) {
  validate();
}

CsrMatrix CsrMatrix::from_edges(std::size_t n, std::span<const Edge> edges, bool symmetrize) {
  std::vector<Edge> entries;
  entries.reserve(symmetrize ? 2 * edges.size() : edges.size());
  for (const auto& [r, c] : edges) {
    if (r >= n || c >= n) {
      throw DimensionError("edge (" + std::to_string(r) + "," + std::to_string(c) + ") outside " + std::to_string(n) +
                           " nodes");
    }
    if (r == c) continue;
    entries.emplace_back(r, c);
    if (symmetrize) entries.emplace_back(c, r);
  }
  std::sort(entries.begin(), entries.end());
  entries.erase(std::unique(entries.begin(), entries.end()), entries.end());

  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::size_t> cols;
  cols.reserve(entries.size());
  for (const auto& [r, c] : entries) {
    ++offsets[r + 1];
    cols.push_back(c);
  }
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  std::vector<double> vals(cols.size(), 1.0);
  return CsrMatrix(n, n, std::move(offsets), std::move(cols), std::move(vals), Normalization::None);
}

CsrMatrix CsrMatrix::row_normalized() const {
  std::vector<double> vals(values_.size());
  for (std::size_t r = 0; r < num_rows_; ++r) {
    const std::size_t deg = degree(r);
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) vals[k] = 1.0 / static_cast<double>(deg);
  }
  return CsrMatrix(num_rows_, num_cols_, row_offsets_, col_indices_, std::move(vals), Normalization::RowMean);
}

CsrMatrix CsrMatrix::symmetric_normalized() const {
  if (num_rows_ != num_cols_) throw DimensionError("symmetric normalization needs a square matrix");
  std::vector<double> inv_sqrt(num_rows_, 0.0);
  for (std::size_t r = 0; r < num_rows_; ++r) {
    if (degree(r) > 0) inv_sqrt[r] = 1.0 / std::sqrt(static_cast<double>(degree(r)));
  }
  std::vector<double> vals(values_.size());
  for (std::size_t r = 0; r < num_rows_; ++r) {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      vals[k] = inv_sqrt[r] * inv_sqrt[col_indices_[k]];
    }
  }
  return CsrMatrix(num_rows_, num_cols_, row_offsets_, col_indices_, std::move(vals), Normalization::Symmetric);
}

std::vector<double> CsrMatrix::multiply(std::span<const double> x) const {
  if (x.size() != num_cols_) throw DimensionError("csr multiply: vector length mismatch");
  std::vector<double> y(num_rows_, 0.0);
  for (std::size_t r = 0; r < num_rows_; ++r) {
    double acc = 0.0;
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) acc += values_[k] * x[col_indices_[k]];
    y[r] = acc;
  }
  return y;
}

Matrix CsrMatrix::multiply(const Matrix& x) const {
  if (x.rows != num_cols_) throw DimensionError("csr multiply: " + std::to_string(num_cols_) + " cols vs " + x.shape_string());
  Matrix y(num_rows_, x.cols);
  for (std::size_t r = 0; r < num_rows_; ++r) {
    auto out = y.row(r);
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      const double w = values_[k];
      auto src = x.row(col_indices_[k]);
      for (std::size_t j = 0; j < x.cols; ++j) out[j] += w * src[j];
    }
  }
  return y;
}

Matrix CsrMatrix::multiply_transposed(const Matrix& x) const {
  if (x.rows != num_rows_) throw DimensionError("csr multiply_transposed: row mismatch " + x.shape_string());
  Matrix y(num_cols_, x.cols);
  for (std::size_t r = 0; r < num_rows_; ++r) {
    auto src = x.row(r);
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      const double w = values_[k];
      auto out = y.row(col_indices_[k]);
      for (std::size_t j = 0; j < x.cols; ++j) out[j] += w * src[j];
    }
  }
  return y;
}

Matrix CsrMatrix::to_dense() const {
  Matrix d(num_rows_, num_cols_);
  for (std::size_t r = 0; r < num_rows_; ++r) {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) d(r, col_indices_[k]) = values_[k];
  }
  return d;
}

bool CsrMatrix::is_symmetric_pattern() const {
  if (num_rows_ != num_cols_) return false;
  for (std::size_t r = 0; r < num_rows_; ++r) {
    for (std::size_t c : neighbors(r)) {
      auto back = neighbors(c);
      if (!std::binary_search(back.begin(), back.end(), r)) return false;
    }
  }
  return true;
}

void CsrMatrix::validate() const {
  if (row_offsets_.size() != num_rows_ + 1) throw ContractError("csr: row_offsets length must be num_rows + 1");
  if (row_offsets_.front() != 0) throw ContractError("csr: row_offsets must start at 0");
  if (row_offsets_.back() != col_indices_.size()) throw ContractError("csr: last row offset must equal nnz");
  if (values_.size() != col_indices_.size()) throw ContractError("csr: values and col_indices lengths differ");
  for (std::size_t r = 0; r < num_rows_; ++r) {
    if (row_offsets_[r + 1] < row_offsets_[r]) throw ContractError("csr: row_offsets not monotone");
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      if (col_indices_[k] >= num_cols_) throw ContractError("csr: column index out of range");
      if (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1]) {
        throw ContractError("csr: column indices must strictly increase within row " + std::to_string(r));
      }
    }
    if (norm_ == Normalization::RowMean && degree(r) > 0) {
      double s = 0.0;
      for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) s += values_[k];
      if (std::abs(s - 1.0) > 1e-12) throw ContractError("csr: normalized row " + std::to_string(r) + " does not sum to 1");
    }
  }
}

}  // namespace magsim
