#include <string>
#include <tuple>
#include <vector>

#include "specfil/bundle.hpp"
#include "specfil/error.hpp"
#include "specfil/rng.hpp"

namespace specfil {

GraphBundle generate_csbm(Index n, Index d, int classes, double p_in, double p_out,
                          double feature_signal, std::uint64_t seed) {
  if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0 || p_out > 1.0)
    throw Error("csbm: probabilities must lie in [0, 1]");
  if (classes < 2) throw Error("csbm: need at least 2 classes");
  if (n < classes) throw Error("csbm: n must be >= classes");
  if (d < 1) throw Error("csbm: d must be >= 1");

  GraphBundle b;
  b.name = "csbm_n" + std::to_string(n) + "_c" + std::to_string(classes);
  b.num_classes = classes;
  b.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) b.labels[static_cast<std::size_t>(i)] = static_cast<int>(i % classes);

  // Independent substreams per stage so changing one stage cannot shift
  // another stage's draws.
  Pcg64 edge_rng(Pcg64::mix(seed, 1));
  Pcg64 feat_rng(Pcg64::mix(seed, 2));
  Pcg64 split_rng(Pcg64::mix(seed, 3));

  std::vector<std::tuple<Index, Index, double>> triplets;
  for (Index u = 0; u < n; ++u) {
    for (Index v = u + 1; v < n; ++v) {
      const double p = (b.labels[static_cast<std::size_t>(u)] == b.labels[static_cast<std::size_t>(v)]) ? p_in : p_out;
      if (edge_rng.next_double() < p) {
        triplets.emplace_back(u, v, 1.0);
        triplets.emplace_back(v, u, 1.0);
      }
    }
  }
  b.adjacency = SparseMatrix::from_triplets(n, n, std::move(triplets));

  // Class means: random directions scaled to norm feature_signal.
  Matrix means = Matrix::Zero(classes, d);
  for (int c = 0; c < classes; ++c) {
    for (Index j = 0; j < d; ++j) means(c, j) = feat_rng.next_normal();
    const double norm = means.row(c).norm();
    if (norm > 0.0) means.row(c) *= feature_signal / norm;
  }
  b.features = Matrix::Zero(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) {
      b.features(i, j) = means(b.labels[static_cast<std::size_t>(i)], j) + feat_rng.next_normal();
    }
  }

  for (int k = 0; k < 10; ++k) {
    b.splits.push_back(stratified_split(b.labels, classes, 0.48, 0.32, split_rng));
  }
  b.validate();
  return b;
}

}  // namespace specfil
