#pragma once

#include <vector>

#include "specfil/bundle.hpp"
#include "specfil/encoder.hpp"
#include "specfil/filter_bank.hpp"

namespace specfil {

/// A sampled subgraph with its renormalized operators and the feature-shuffle
/// corruption. node_ids are sorted, so a full-size sample induces the
/// original graph under the identity relabeling.
struct BatchSample {
  std::vector<Index> node_ids;   // sorted, distinct
  Matrix sub_features;           // N' x d, rows gathered by node_ids
  FilterOperators sub_ops;       // operators of the induced subgraph
  std::vector<Index> corruption;  // row k of the corrupted view is sub_features row corruption[k]

  Index size() const { return static_cast<Index>(node_ids.size()); }
  const SparseMatrix& sub_adjacency() const { return sub_ops.adj_n; }

  /// Materializes the row-permuted feature matrix (a multiset-preserving
  /// shuffle of sub_features).
  Matrix corrupted_features() const;
};

struct TrainConfig {
  Index embed_dim = 512;
  Index sample_size = 2000;
  int batch_size = 2;       // independent subgraph samples per step, gradients summed
  double learning_rate = 0.001;
  int max_epochs = 30000;
  int patience = 20;        // epochs without training-loss improvement
  std::uint64_t seed = 0;
  FilterBank bank = FilterBank::make(FilterKind::Gprgnn, 4);
  bool per_channel_slope = false;
  // When >= 0, only this (trainable) filter contributes to the loss; used by
  // the independent-encoders mode.
  int only_filter = -1;

  void validate() const;
};

/// Uniform node sample without replacement; the induced subgraph is
/// renormalized from scratch (fresh degrees, fresh self-loops) and the
/// corruption is a uniform row permutation.
BatchSample sample_batch(const GraphBundle& bundle, Index sample_size, Pcg64& rng);

/// Per-filter contrastive BCE (positives 1, negatives 0, clean anchor):
///   (1/2N') sum_k [ sp(-s_k) + sp(s~_k) ]
/// with s the pre-sigmoid bilinear scores. Identity filters are rejected:
/// their positive and negative anchors coincide.
double filter_loss(const EncoderState& state, const BatchSample& batch, const FilterHandle& filt);

/// Jensen-Shannon MI estimate (diagnostic; training minimizes filter_loss):
///   mean_k[-sp(-s_k)] - mean_k[sp(s~_k)]
double jsd_estimate(const EncoderState& state, const BatchSample& batch, const FilterHandle& filt);

/// Mean of filter_loss over the trainable (non-identity) filters; entry j of
/// `per_filter` pairs with the j-th trainable filter in ascending bank order
/// (the same sample may be passed for all of them).
double total_loss(const EncoderState& state, const std::vector<const BatchSample*>& per_filter,
                  const FilterBank& bank);

struct BackwardResult {
  double loss = 0.0;
  EncoderGrads grads;
  std::vector<double> per_filter_jsd;  // one per trainable filter
};

/// Reverse-mode gradients of total_loss w.r.t. theta, the PReLU slope, and
/// the discriminator; the readout path is differentiated through both the
/// anchor and every node term.
BackwardResult backward(const EncoderState& state, const std::vector<const BatchSample*>& per_filter,
                        const FilterBank& bank);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::vector<double> jsd;
  double wallclock_ms = 0.0;
};

struct TrainResult {
  EncoderState state;  // parameters of the best-loss epoch
  std::vector<EpochRecord> log;
  int best_epoch = -1;
  double best_loss = 0.0;
  Pcg64::State rng_state{};  // sampler state at the end of the run
};

/// Adam training loop with early stopping on the training loss. Fully
/// deterministic for a fixed (seed, config, bundle): batches are drawn
/// sequentially and per-batch gradients are reduced in batch order.
TrainResult train(const GraphBundle& bundle, const TrainConfig& config);

/// Trains one encoder per trainable filter (same config otherwise, per-filter
/// seed streams). Element j corresponds to the j-th trainable filter.
std::vector<TrainResult> train_independent(const GraphBundle& bundle, const TrainConfig& config);

/// Full-graph embeddings H_i = PReLU(F_i X Theta), one per filter, identity
/// included.
std::vector<Matrix> embed_full(const EncoderState& state, const GraphBundle& bundle,
                               const FilterBank& bank);

/// embed_full for independently trained encoders; identity filters reuse the
/// first trainable filter's encoder.
std::vector<Matrix> embed_full_independent(const std::vector<EncoderState>& states,
                                           const GraphBundle& bundle, const FilterBank& bank);

}  // namespace specfil
