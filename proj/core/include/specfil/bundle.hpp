#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "specfil/matrix.hpp"
#include "specfil/sparse.hpp"

namespace specfil {

/// One train/val/test partition of a node subset. The three sets are pairwise
/// disjoint; they need not cover all nodes.
struct SplitSpec {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
};

/// Undirected graph with dense node features, integer labels, and a list of
/// evaluation splits. Immutable after loading; safe for concurrent reads.
struct GraphBundle {
  std::string name;
  SparseMatrix adjacency;  // symmetric, binary, empty diagonal
  Matrix features;         // n x d
  std::vector<int> labels;  // length n, values in [0, num_classes)
  int num_classes = 0;
  std::vector<SplitSpec> splits;

  Index num_nodes() const { return adjacency.n_rows; }
  Index feature_dim() const { return features.cols(); }

  /// Throws Error on any invariant violation (shape mismatch, label range,
  /// split overlap, asymmetry, missing class in a training set).
  void validate() const;
};

/// Loads a bundle directory:
///   graph.json   {"name", "n", "d", "num_classes"}
///   edges.tsv    one edge per line, "u<TAB>v" with u < v, 0-based
///   features.tsv n lines of d tab-separated reals
///   labels.tsv   n lines, one integer each
///   splits/split_<k>.json  {"train": [...], "val": [...], "test": [...]}
/// Every failure carries the offending file (and line where applicable).
/// Edges with u > v are accepted and flipped with a warning on `warnings`.
GraphBundle load_bundle(const std::filesystem::path& dir, std::vector<std::string>* warnings = nullptr);

/// Writes the canonical on-disk form (sorted edges, %.17g reals) such that
/// load_bundle(save_bundle(b)) reproduces b exactly.
void save_bundle(const GraphBundle& bundle, const std::filesystem::path& dir);

/// Contextual stochastic block model generator used as a verification oracle.
/// Classes are assigned round-robin (balanced); each unordered node pair gets
/// an edge with probability p_in (same class) or p_out (different class);
/// features are unit-variance Gaussians around a class mean of norm
/// `feature_signal`. Ten stratified 48/32/20 splits are attached.
/// Deterministic for a fixed seed.
GraphBundle generate_csbm(Index n, Index d, int classes, double p_in, double p_out,
                          double feature_signal, std::uint64_t seed);

/// Stratified train/val/test split (fractions per class), deterministic in rng.
SplitSpec stratified_split(const std::vector<int>& labels, int num_classes, double train_frac,
                           double val_frac, class Pcg64& rng);

/// L1-normalizes each feature row in place; zero rows are left untouched.
void row_normalize_features(GraphBundle& bundle);

}  // namespace specfil
