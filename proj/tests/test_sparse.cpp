#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "specfil/error.hpp"
#include "specfil/sparse.hpp"

using namespace specfil;

namespace {

SparseMatrix edge_list(Index n, std::vector<std::pair<Index, Index>> edges) {
  std::vector<std::tuple<Index, Index, double>> t;
  for (auto [u, v] : edges) {
    t.emplace_back(u, v, 1.0);
    t.emplace_back(v, u, 1.0);
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

}  // namespace

TEST_SUITE("sparse") {

TEST_CASE("normalize_adjacency on a single edge gives all 0.5") {
  const auto a_n = normalize_adjacency(edge_list(2, {{0, 1}}));
  const Matrix d = a_n.to_dense();
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 2; ++j) CHECK(d(i, j) == 0.5);
  }
}

TEST_CASE("normalize_adjacency on an isolated node is the identity") {
  const auto a_n = normalize_adjacency(edge_list(1, {}));
  CHECK(a_n.nnz() == 1);
  CHECK(a_n.at(0, 0) == 1.0);
}

TEST_CASE("normalize_adjacency on the 3-path matches the dense oracle") {
  const auto adj = edge_list(3, {{0, 1}, {1, 2}});
  const auto a_n = normalize_adjacency(adj);
  CHECK(a_n.at(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a_n.at(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
  CHECK(a_n.at(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(a_n.at(1, 2) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
  CHECK(a_n.at(2, 2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a_n.at(0, 2) == 0.0);

  const Matrix ref = oracles::dense_normalized_adjacency(adj.to_dense());
  CHECK((a_n.to_dense() - ref).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("normalize_adjacency rejects bad inputs") {
  SUBCASE("non-square") {
    SparseMatrix m = SparseMatrix::from_triplets(2, 3, {{0, 1, 1.0}, {1, 0, 1.0}});
    CHECK_THROWS_AS(normalize_adjacency(m), Error);
  }
  SUBCASE("asymmetric") {
    SparseMatrix m = SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}});
    CHECK_THROWS_AS(normalize_adjacency(m), Error);
  }
  SUBCASE("explicit self-loop") {
    SparseMatrix m = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}});
    CHECK_THROWS_AS(normalize_adjacency(m), Error);
  }
  SUBCASE("non-binary value") {
    SparseMatrix m = SparseMatrix::from_triplets(2, 2, {{0, 1, 0.5}, {1, 0, 0.5}});
    CHECK_THROWS_AS(normalize_adjacency(m), Error);
  }
}

TEST_CASE("normalized_laplacian closed forms") {
  const auto lap2 = normalized_laplacian(normalize_adjacency(edge_list(2, {{0, 1}})));
  CHECK(lap2.at(0, 0) == 0.5);
  CHECK(lap2.at(0, 1) == -0.5);
  CHECK(lap2.at(1, 0) == -0.5);
  CHECK(lap2.at(1, 1) == 0.5);

  const auto lap1 = normalized_laplacian(normalize_adjacency(edge_list(1, {})));
  CHECK(lap1.at(0, 0) == 0.0);

  const auto adj = edge_list(3, {{0, 1}, {1, 2}});
  const auto lap3 = normalized_laplacian(normalize_adjacency(adj));
  const Matrix ref =
      Matrix::Identity(3, 3) - oracles::dense_normalized_adjacency(adj.to_dense());
  CHECK((lap3.to_dense() - ref).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("spmv identity and zero") {
  Pcg64 rng(42);
  const Matrix x = oracles::random_matrix(6, 3, rng);
  CHECK((spmv(SparseMatrix::identity(6), x) - x).cwiseAbs().maxCoeff() == 0.0);

  SparseMatrix zero;
  zero.n_rows = zero.n_cols = 6;
  zero.row_ptr.assign(7, 0);
  CHECK(spmv(zero, x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("spmv shape mismatch") {
  Pcg64 rng(1);
  CHECK_THROWS_AS(spmv(SparseMatrix::identity(4), oracles::random_matrix(5, 2, rng)), Error);
}

TEST_CASE("spmv agrees exactly with the ordered dense oracle") {
  Pcg64 rng(7);
  SUBCASE("fixed 5x5 with 8 nonzeros") {
    std::vector<std::tuple<Index, Index, double>> t;
    int placed = 0;
    while (placed < 8) {
      const Index i = static_cast<Index>(rng.next_below(5));
      const Index j = static_cast<Index>(rng.next_below(5));
      bool exists = false;
      for (const auto& [r, c, v] : t) {
        if (r == i && c == j) exists = true;
      }
      if (exists) continue;
      t.emplace_back(i, j, rng.next_normal());
      ++placed;
    }
    const auto m = SparseMatrix::from_triplets(5, 5, std::move(t));
    const Matrix x = oracles::random_matrix(5, 3, rng);
    const Matrix got = spmv(m, x);
    const Matrix ref = oracles::dense_matmul_ordered(m.to_dense(), x);
    CHECK((got - ref).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("fuzz up to 50x50") {
    for (int trial = 0; trial < 30; ++trial) {
      const Index rows = 1 + static_cast<Index>(rng.next_below(50));
      const Index cols = 1 + static_cast<Index>(rng.next_below(50));
      std::vector<std::tuple<Index, Index, double>> t;
      for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
          if (rng.next_double() < 0.15) t.emplace_back(i, j, rng.next_normal());
        }
      }
      const auto m = SparseMatrix::from_triplets(rows, cols, std::move(t));
      const Matrix x = oracles::random_matrix(cols, 1 + static_cast<Index>(rng.next_below(4)), rng);
      CHECK((spmv(m, x) - oracles::dense_matmul_ordered(m.to_dense(), x)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("normalized adjacency is bit-exactly symmetric") {
  Pcg64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const auto adj = oracles::random_graph(2 + static_cast<Index>(rng.next_below(40)), 0.2, rng);
    const auto a_n = normalize_adjacency(adj);
    for (Index i = 0; i < a_n.n_rows; ++i) {
      for (Index k = a_n.row_ptr[static_cast<std::size_t>(i)]; k < a_n.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
        const Index j = a_n.col_idx[static_cast<std::size_t>(k)];
        CHECK(a_n.at(j, i) == a_n.values[static_cast<std::size_t>(k)]);
      }
    }
  }
}

TEST_CASE("power iteration bounds the spectral radius by 1") {
  Pcg64 rng(13);
  for (int trial = 0; trial < 8; ++trial) {
    const Index n = 3 + static_cast<Index>(rng.next_below(30));
    const auto a_n = normalize_adjacency(oracles::random_graph(n, 0.3, rng));
    Matrix v = oracles::random_matrix(n, 1, rng);
    v /= v.norm();
    double radius = 0.0;
    for (int it = 0; it < 150; ++it) {
      const Matrix w = spmv(a_n, v);
      radius = w.norm();
      if (radius == 0.0) break;
      v = w / radius;
    }
    CHECK(radius <= 1.0 + 1e-9);
  }
}

TEST_CASE("from_triplets rejects duplicates and range violations") {
  CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {0, 1, 2.0}}), Error);
  CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{0, 5, 1.0}}), Error);
  CHECK_THROWS_AS(SparseMatrix::from_triplets(2, 2, {{-1, 0, 1.0}}), Error);
}

TEST_CASE("validate catches structural corruption") {
  auto m = SparseMatrix::identity(3);
  m.values[1] = std::nan("");
  CHECK_THROWS_AS(m.validate(), Error);
  m = SparseMatrix::identity(3);
  m.row_ptr[3] = 5;
  CHECK_THROWS_AS(m.validate(), Error);
}

}  // TEST_SUITE
