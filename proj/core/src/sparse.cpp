#include "specfil/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "specfil/error.hpp"

namespace specfil {

SparseMatrix SparseMatrix::from_triplets(Index n_rows, Index n_cols,
                                         std::vector<std::tuple<Index, Index, double>> triplets) {
  if (n_rows < 0 || n_cols < 0) throw Error("sparse: negative dimension");
  std::sort(triplets.begin(), triplets.end(),
            [](const auto& a, const auto& b) {
              return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
            });
  SparseMatrix m;
  m.n_rows = n_rows;
  m.n_cols = n_cols;
  m.row_ptr.assign(static_cast<std::size_t>(n_rows) + 1, 0);
  m.col_idx.reserve(triplets.size());
  m.values.reserve(triplets.size());
  Index prev_r = -1, prev_c = -1;
  for (const auto& [r, c, v] : triplets) {
    if (r < 0 || r >= n_rows || c < 0 || c >= n_cols)
      throw Error("sparse: triplet (" + std::to_string(r) + ", " + std::to_string(c) + ") out of range");
    if (r == prev_r && c == prev_c)
      throw Error("sparse: duplicate entry at (" + std::to_string(r) + ", " + std::to_string(c) + ")");
    m.row_ptr[static_cast<std::size_t>(r) + 1]++;
    m.col_idx.push_back(c);
    m.values.push_back(v);
    prev_r = r;
    prev_c = c;
  }
  for (Index i = 0; i < n_rows; ++i) {
    m.row_ptr[static_cast<std::size_t>(i) + 1] += m.row_ptr[static_cast<std::size_t>(i)];
  }
  m.validate();
  return m;
}

SparseMatrix SparseMatrix::identity(Index n) {
  SparseMatrix m;
  m.n_rows = m.n_cols = n;
  m.row_ptr.resize(static_cast<std::size_t>(n) + 1);
  m.col_idx.resize(static_cast<std::size_t>(n));
  m.values.assign(static_cast<std::size_t>(n), 1.0);
  for (Index i = 0; i <= n; ++i) m.row_ptr[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < n; ++i) m.col_idx[static_cast<std::size_t>(i)] = i;
  return m;
}

void SparseMatrix::validate() const {
  if (row_ptr.size() != static_cast<std::size_t>(n_rows) + 1)
    throw Error("sparse: row_ptr length mismatch");
  if (row_ptr.front() != 0) throw Error("sparse: row_ptr[0] != 0");
  if (row_ptr.back() != nnz()) throw Error("sparse: row_ptr[n_rows] != nnz");
  if (col_idx.size() != values.size()) throw Error("sparse: col_idx/values length mismatch");
  for (Index i = 0; i < n_rows; ++i) {
    const Index lo = row_ptr[static_cast<std::size_t>(i)];
    const Index hi = row_ptr[static_cast<std::size_t>(i) + 1];
    if (lo > hi) throw Error("sparse: row_ptr not non-decreasing at row " + std::to_string(i));
    for (Index k = lo; k < hi; ++k) {
      const Index c = col_idx[static_cast<std::size_t>(k)];
      if (c < 0 || c >= n_cols)
        throw Error("sparse: column index out of range in row " + std::to_string(i));
      if (k > lo && c <= col_idx[static_cast<std::size_t>(k) - 1])
        throw Error("sparse: columns not strictly increasing in row " + std::to_string(i));
      if (!std::isfinite(values[static_cast<std::size_t>(k)]))
        throw Error("sparse: non-finite value in row " + std::to_string(i));
    }
  }
}

double SparseMatrix::at(Index i, Index j) const {
  const auto begin = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[static_cast<std::size_t>(i)]);
  const auto end = col_idx.begin() + static_cast<std::ptrdiff_t>(row_ptr[static_cast<std::size_t>(i) + 1]);
  const auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return 0.0;
  return values[static_cast<std::size_t>(it - col_idx.begin())];
}

bool SparseMatrix::is_symmetric() const {
  if (n_rows != n_cols) return false;
  for (Index i = 0; i < n_rows; ++i) {
    for (Index k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      const Index j = col_idx[static_cast<std::size_t>(k)];
      if (at(j, i) != values[static_cast<std::size_t>(k)]) return false;
    }
  }
  return true;
}

Matrix SparseMatrix::to_dense() const {
  Matrix d = Matrix::Zero(n_rows, n_cols);
  for (Index i = 0; i < n_rows; ++i) {
    for (Index k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      d(i, col_idx[static_cast<std::size_t>(k)]) = values[static_cast<std::size_t>(k)];
    }
  }
  return d;
}

Matrix spmv(const SparseMatrix& m, const Matrix& x) {
  if (m.n_cols != x.rows())
    throw Error("spmv: shape mismatch (" + std::to_string(m.n_rows) + "x" + std::to_string(m.n_cols) +
                " times " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + ")");
  Matrix out = Matrix::Zero(m.n_rows, x.cols());
  for (Index i = 0; i < m.n_rows; ++i) {
    auto row = out.row(i);
    for (Index k = m.row_ptr[static_cast<std::size_t>(i)]; k < m.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      row += m.values[static_cast<std::size_t>(k)] * x.row(m.col_idx[static_cast<std::size_t>(k)]);
    }
  }
  return out;
}

SparseMatrix normalize_adjacency(const SparseMatrix& adj) {
  adj.validate();
  if (adj.n_rows != adj.n_cols) throw Error("normalize_adjacency: matrix not square");
  for (Index i = 0; i < adj.n_rows; ++i) {
    for (Index k = adj.row_ptr[static_cast<std::size_t>(i)]; k < adj.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      const Index j = adj.col_idx[static_cast<std::size_t>(k)];
      if (i == j) throw Error("normalize_adjacency: explicit self-loop at node " + std::to_string(i));
      if (adj.values[static_cast<std::size_t>(k)] != 1.0)
        throw Error("normalize_adjacency: non-binary entry at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      if (adj.at(j, i) != 1.0)
        throw Error("normalize_adjacency: asymmetric entry at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
    }
  }

  // Degrees count the added self-loop, so every degree is >= 1 and no
  // division guard is needed.
  std::vector<double> deg(static_cast<std::size_t>(adj.n_rows));
  for (Index i = 0; i < adj.n_rows; ++i) {
    deg[static_cast<std::size_t>(i)] =
        static_cast<double>(adj.row_ptr[static_cast<std::size_t>(i) + 1] - adj.row_ptr[static_cast<std::size_t>(i)] + 1);
  }

  // Values for (i,j) and (j,i) come from the same expression evaluated once,
  // so the result is symmetric to the bit.
  std::vector<std::tuple<Index, Index, double>> triplets;
  triplets.reserve(static_cast<std::size_t>(adj.nnz() + adj.n_rows));
  for (Index i = 0; i < adj.n_rows; ++i) {
    triplets.emplace_back(i, i, 1.0 / deg[static_cast<std::size_t>(i)]);
    for (Index k = adj.row_ptr[static_cast<std::size_t>(i)]; k < adj.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      const Index j = adj.col_idx[static_cast<std::size_t>(k)];
      if (j <= i) continue;
      const double v = 1.0 / std::sqrt(deg[static_cast<std::size_t>(i)] * deg[static_cast<std::size_t>(j)]);
      triplets.emplace_back(i, j, v);
      triplets.emplace_back(j, i, v);
    }
  }
  return SparseMatrix::from_triplets(adj.n_rows, adj.n_cols, std::move(triplets));
}

SparseMatrix normalized_laplacian(const SparseMatrix& adj_n) {
  adj_n.validate();
  if (adj_n.n_rows != adj_n.n_cols) throw Error("normalized_laplacian: matrix not square");
  std::vector<std::tuple<Index, Index, double>> triplets;
  triplets.reserve(static_cast<std::size_t>(adj_n.nnz() + adj_n.n_rows));
  for (Index i = 0; i < adj_n.n_rows; ++i) {
    bool has_diag = false;
    for (Index k = adj_n.row_ptr[static_cast<std::size_t>(i)]; k < adj_n.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
      const Index j = adj_n.col_idx[static_cast<std::size_t>(k)];
      const double v = adj_n.values[static_cast<std::size_t>(k)];
      if (i == j) {
        has_diag = true;
        triplets.emplace_back(i, i, 1.0 - v);
      } else {
        triplets.emplace_back(i, j, -v);
      }
    }
    if (!has_diag) triplets.emplace_back(i, i, 1.0);
  }
  return SparseMatrix::from_triplets(adj_n.n_rows, adj_n.n_cols, std::move(triplets));
}

}  // namespace specfil
