#pragma once

// Independent reference implementations used as test oracles. Everything here
// recomputes results through a different route than the library (dense
// algebra, eigendecompositions, finite differences) and must stay decoupled
// from the code under test.

#include <Eigen/Eigenvalues>
#include <functional>
#include <tuple>
#include <vector>

#include "specfil/filter_bank.hpp"
#include "specfil/matrix.hpp"
#include "specfil/rng.hpp"
#include "specfil/sparse.hpp"

namespace oracles {

using specfil::Index;
using specfil::Matrix;
using specfil::Pcg64;
using specfil::SparseMatrix;
using specfil::Vector;

// D^{-1/2} (A + I) D^{-1/2} via dense arithmetic.
inline Matrix dense_normalized_adjacency(const Matrix& adj) {
  const Index n = adj.rows();
  Matrix with_loops = adj + Matrix::Identity(n, n);
  Vector deg = with_loops.rowwise().sum();
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      out(i, j) = with_loops(i, j) / std::sqrt(deg(i) * deg(j));
    }
  }
  return out;
}

// Dense product with the same accumulation order as the CSR kernel (ascending
// column index); skipped zeros do not change the accumulated value.
inline Matrix dense_matmul_ordered(const Matrix& a, const Matrix& x) {
  Matrix out = Matrix::Zero(a.rows(), x.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index c = 0; c < x.cols(); ++c) {
      double acc = 0.0;
      for (Index j = 0; j < a.cols(); ++j) {
        if (a(i, j) != 0.0) acc += a(i, j) * x(j, c);
      }
      out(i, c) = acc;
    }
  }
  return out;
}

// Filter applied through the eigendecomposition of the dense normalized
// Laplacian: U g(Lambda) U^T x.
inline Matrix eigen_filter_apply(const specfil::FilterBank& bank, int filter_index,
                                 const Matrix& raw_adjacency, const Matrix& x) {
  const Matrix adj_n = dense_normalized_adjacency(raw_adjacency);
  const Eigen::MatrixXd lap = Matrix::Identity(adj_n.rows(), adj_n.cols()) - adj_n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  const Eigen::MatrixXd u = solver.eigenvectors();
  Eigen::VectorXd lambda = solver.eigenvalues();
  Eigen::VectorXd response(lambda.size());
  for (Index k = 0; k < lambda.size(); ++k) {
    response(k) = specfil::spectral_response(bank, filter_index, lambda(k));
  }
  return u * response.asDiagonal() * u.transpose() * x;
}

// Undirected Erdos-Renyi graph with no self-loops, as a binary CSR matrix.
inline SparseMatrix random_graph(Index n, double p, Pcg64& rng) {
  std::vector<std::tuple<Index, Index, double>> triplets;
  for (Index u = 0; u < n; ++u) {
    for (Index v = u + 1; v < n; ++v) {
      if (rng.next_double() < p) {
        triplets.emplace_back(u, v, 1.0);
        triplets.emplace_back(v, u, 1.0);
      }
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(triplets));
}

inline Matrix random_matrix(Index rows, Index cols, Pcg64& rng) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.next_normal();
  }
  return m;
}

// Central finite difference of `loss` with respect to coordinate `idx` of a
// parameter exposed through get/set callbacks.
inline double central_difference(const std::function<double()>& loss,
                                 const std::function<double()>& get,
                                 const std::function<void(double)>& set, double step = 1e-5) {
  const double saved = get();
  set(saved + step);
  const double up = loss();
  set(saved - step);
  const double down = loss();
  set(saved);
  return (up - down) / (2.0 * step);
}

// Relative error with a floor so near-zero coordinates compare absolutely.
inline double grad_error(double analytic, double numeric) {
  const double denom = std::max({1e-6, std::abs(analytic), std::abs(numeric)});
  return std::abs(analytic - numeric) / denom;
}

}  // namespace oracles
