#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "magsim/tensor.hpp"

namespace magsim {

enum class Normalization {
  None,       // raw 0/1 weights
  RowMean,    // each nonempty row sums to 1
  Symmetric,  // D^-1/2 A D^-1/2; kept out of the theory checks
};

using Edge = std::pair<std::size_t, std::size_t>;

/// Compressed sparse row matrix. Row v lists the in-neighbors of node v.
class CsrMatrix {
 public:
  CsrMatrix() = default;
  CsrMatrix(std::size_t num_rows, std::size_t num_cols, std::vector<std::size_t> row_offsets,
            std::vector<std::size_t> col_indices, std::vector<double> values,
            Normalization norm = Normalization::None);

  /// Binary adjacency from (row, col) pairs. Self loops and duplicates are
  /// dropped; with `symmetrize` each pair is also inserted transposed.
  static CsrMatrix from_edges(std::size_t n, std::span<const Edge> edges, bool symmetrize);

  std::size_t num_rows() const { return num_rows_; }
  std::size_t num_cols() const { return num_cols_; }
  std::size_t nnz() const { return col_indices_.size(); }
  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::size_t>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }
  Normalization normalization() const { return norm_; }
  bool normalized() const { return norm_ == Normalization::RowMean; }

  std::size_t degree(std::size_t row) const { return row_offsets_[row + 1] - row_offsets_[row]; }
  std::span<const std::size_t> neighbors(std::size_t row) const {
    return {col_indices_.data() + row_offsets_[row], degree(row)};
  }

  CsrMatrix row_normalized() const;
  CsrMatrix symmetric_normalized() const;

  /// y = A x
  std::vector<double> multiply(std::span<const double> x) const;
  /// Y = A X (dense)
  Matrix multiply(const Matrix& x) const;
  /// Y = A^T X (dense)
  Matrix multiply_transposed(const Matrix& x) const;
  Matrix to_dense() const;

  bool is_symmetric_pattern() const;

  /// Throws ContractError if any structural invariant is broken.
  void validate() const;

  bool operator==(const CsrMatrix&) const = default;

 private:
  std::size_t num_rows_ = 0;
  std::size_t num_cols_ = 0;
  std::vector<std::size_t> row_offsets_{0};
  std::vector<std::size_t> col_indices_;
  std::vector<double> values_;
  Normalization norm_ = Normalization::None;
};

}  // namespace magsim
