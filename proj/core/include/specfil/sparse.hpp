#pragma once

#include <tuple>
#include <vector>

#include "specfil/matrix.hpp"

namespace specfil {

/// Real matrix in CSR form. Column indices are strictly increasing within
/// each row and all stored values are finite; validate() enforces both.
/// Instances are immutable after construction and safe to share across
/// threads.
struct SparseMatrix {
  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<Index> row_ptr;  // size n_rows + 1
  std::vector<Index> col_idx;  // size nnz
  std::vector<double> values;  // size nnz

  Index nnz() const { return static_cast<Index>(col_idx.size()); }

  /// Builds from (row, col, value) triplets. Triplets are sorted; duplicate
  /// (row, col) pairs are rejected.
  static SparseMatrix from_triplets(Index n_rows, Index n_cols,
                                    std::vector<std::tuple<Index, Index, double>> triplets);

  static SparseMatrix identity(Index n);

  /// Throws Error if any structural invariant is violated.
  void validate() const;

  /// Entry lookup by binary search; absent entries read as 0.
  double at(Index i, Index j) const;

  bool is_symmetric() const;

  Matrix to_dense() const;
};

/// CSR times dense, exact accumulation in ascending column order per row so
/// repeated runs are bit-identical.
Matrix spmv(const SparseMatrix& m, const Matrix& x);

/// Symmetric degree normalization with self-loops: entry (i,j) of the result
/// is 1/sqrt(deg(i) * deg(j)) where deg counts the input edges plus the added
/// self-loop. The input must be square, symmetric, binary, and have an empty
/// diagonal (self-loops are added here, never supplied).
SparseMatrix normalize_adjacency(const SparseMatrix& adj);

/// I minus the normalized adjacency; eigenvalues land in [0, 2].
SparseMatrix normalized_laplacian(const SparseMatrix& adj_n);

}  // namespace specfil
