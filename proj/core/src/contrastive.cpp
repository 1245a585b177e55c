#include "specfil/contrastive.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#include "specfil/error.hpp"
#include "specfil/parallel.hpp"

namespace specfil {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Overflow-safe softplus.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::vector<int> trainable_indices(const FilterBank& bank) {
  std::vector<int> out;
  for (int i = 0; i < bank.size(); ++i) {
    if (!bank.is_identity(i)) out.push_back(i);
  }
  return out;
}

// Forward pass of one filter on one batch, keeping what backward needs.
struct FilterForward {
  Matrix z, h, z_corr, h_corr;
  Vector anchor;          // g = sigma(column mean of h)
  Vector anchor_w;        // q = W g
  Vector scores;          // s_k  = h_k . q
  Vector scores_corr;     // s~_k
  double loss = 0.0;
  double jsd = 0.0;
};

FilterForward forward_filter(const EncoderState& state, const FilterHandle& filt, const Matrix& s_clean,
                             const Matrix& s_corr) {
  FilterForward f;
  f.z = apply_filter(filt, s_clean);
  f.h = prelu(f.z, state.prelu_slope);
  f.z_corr = apply_filter(filt, s_corr);
  f.h_corr = prelu(f.z_corr, state.prelu_slope);

  Vector mean = f.h.colwise().mean();
  f.anchor = mean;
  for (Index j = 0; j < f.anchor.size(); ++j) f.anchor(j) = sigmoid(f.anchor(j));
  f.anchor_w = state.disc_w * f.anchor;
  f.scores = f.h * f.anchor_w;
  f.scores_corr = f.h_corr * f.anchor_w;

  const auto n = static_cast<double>(f.scores.size());
  double acc = 0.0, pos = 0.0, neg = 0.0;
  for (Index k = 0; k < f.scores.size(); ++k) {
    const double sp_pos = softplus(-f.scores(k));
    const double sp_neg = softplus(f.scores_corr(k));
    acc += sp_pos + sp_neg;
    pos += -sp_pos;
    neg += sp_neg;
  }
  f.loss = acc / (2.0 * n);
  f.jsd = pos / n - neg / n;
  return f;
}

// S and its corrupted counterpart for one batch; the corruption is a row
// permutation of the raw features, which commutes with the theta projection.
struct BatchProjection {
  Matrix s_clean;
  Matrix s_corr;
};

BatchProjection project_batch(const EncoderState& state, const BatchSample& batch) {
  if (batch.sub_features.cols() != state.theta.rows())
    throw Error("contrastive: feature dim " + std::to_string(batch.sub_features.cols()) +
                " != encoder input dim " + std::to_string(state.theta.rows()));
  BatchProjection p;
  p.s_clean = batch.sub_features * state.theta;
  p.s_corr.resize(p.s_clean.rows(), p.s_clean.cols());
  for (Index k = 0; k < p.s_clean.rows(); ++k) {
    p.s_corr.row(k) = p.s_clean.row(batch.corruption[static_cast<std::size_t>(k)]);
  }
  return p;
}

void check_pairing(const std::vector<int>& filters, const std::vector<const BatchSample*>& batches) {
  if (filters.empty()) throw Error("contrastive: bank has no trainable (non-identity) filter");
  if (filters.size() != batches.size())
    throw Error("contrastive: expected one batch per trainable filter (" + std::to_string(filters.size()) +
                "), got " + std::to_string(batches.size()));
  for (const auto* b : batches) {
    if (b == nullptr) throw Error("contrastive: null batch");
  }
}

struct FilterGradView {
  Matrix d_s_clean;
  Matrix d_s_corr;
};

// Gradients of one filter term (already scaled by `weight`) with respect to
// the projected features and the shared parameters.
void backward_filter(const EncoderState& state, const FilterHandle& filt, const FilterForward& f,
                     double weight, FilterGradView& view, EncoderGrads& grads) {
  const Index n = f.scores.size();
  const double inv_2n = weight / (2.0 * static_cast<double>(n));

  Vector u(n), v(n);
  for (Index k = 0; k < n; ++k) {
    u(k) = -(1.0 - sigmoid(f.scores(k))) * inv_2n;
    v(k) = sigmoid(f.scores_corr(k)) * inv_2n;
  }

  // s_k = h_k^T W g: gradients split into the W g direction per node and the
  // anchor path, which fans back through the readout mean into every clean row.
  Vector pooled = f.h.transpose() * u + f.h_corr.transpose() * v;  // d'
  grads.disc_w += pooled * f.anchor.transpose();
  Vector d_anchor = state.disc_w.transpose() * pooled;
  Vector d_mean = d_anchor.array() * f.anchor.array() * (1.0 - f.anchor.array());

  Matrix d_h = u * f.anchor_w.transpose();
  d_h.rowwise() += (d_mean / static_cast<double>(n)).transpose();
  Matrix d_h_corr = v * f.anchor_w.transpose();

  const bool per_channel = state.prelu_slope.size() > 1;
  auto through_prelu = [&](const Matrix& z, Matrix& dh) {
    for (Index r = 0; r < z.rows(); ++r) {
      for (Index c = 0; c < z.cols(); ++c) {
        if (z(r, c) < 0.0) {
          const Index sc = per_channel ? c : 0;
          grads.prelu_slope(sc) += dh(r, c) * z(r, c);
          dh(r, c) *= state.prelu_slope(sc);
        }
      }
    }
  };
  through_prelu(f.z, d_h);
  through_prelu(f.z_corr, d_h_corr);

  // Every bank filter is a polynomial in a symmetric operator, so applying
  // the filter to the upstream gradient gives the transposed-filter product.
  view.d_s_clean += apply_filter(filt, d_h);
  view.d_s_corr += apply_filter(filt, d_h_corr);
}

struct LossAndGrads {
  double loss = 0.0;
  EncoderGrads grads;
  std::vector<double> per_filter_jsd;
  bool want_grads = true;
};

LossAndGrads run_filters(const EncoderState& state, const std::vector<int>& filters,
                         const std::vector<const BatchSample*>& batches, const FilterBank& bank,
                         bool want_grads) {
  check_pairing(filters, batches);
  state.check_finite();

  LossAndGrads out;
  out.want_grads = want_grads;
  if (want_grads) out.grads = EncoderGrads::zeros_like(state);
  const double weight = 1.0 / static_cast<double>(filters.size());

  // Shared batches are projected once; first-seen order keeps every later
  // reduction deterministic.
  std::vector<const BatchSample*> unique_batches;
  std::vector<std::size_t> slot_of(batches.size());
  for (std::size_t j = 0; j < batches.size(); ++j) {
    std::size_t slot = unique_batches.size();
    for (std::size_t u = 0; u < unique_batches.size(); ++u) {
      if (unique_batches[u] == batches[j]) {
        slot = u;
        break;
      }
    }
    if (slot == unique_batches.size()) unique_batches.push_back(batches[j]);
    slot_of[j] = slot;
  }
  std::vector<BatchProjection> projections;
  std::vector<FilterGradView> views;
  projections.reserve(unique_batches.size());
  for (const auto* b : unique_batches) {
    projections.push_back(project_batch(state, *b));
    if (want_grads) {
      FilterGradView view;
      view.d_s_clean = Matrix::Zero(b->size(), state.embed_dim());
      view.d_s_corr = Matrix::Zero(b->size(), state.embed_dim());
      views.push_back(std::move(view));
    }
  }

  for (std::size_t j = 0; j < filters.size(); ++j) {
    const auto* batch = batches[j];
    const FilterHandle filt{&bank, &batch->sub_ops, filters[j]};
    const auto& proj = projections[slot_of[j]];
    const FilterForward f = forward_filter(state, filt, proj.s_clean, proj.s_corr);
    out.loss += weight * f.loss;
    out.per_filter_jsd.push_back(f.jsd);
    if (want_grads) backward_filter(state, filt, f, weight, views[slot_of[j]], out.grads);
  }

  if (want_grads) {
    for (std::size_t u = 0; u < unique_batches.size(); ++u) {
      const auto* batch = unique_batches[u];
      auto& view = views[u];
      // Undo the corruption permutation, then one GEMM back onto theta.
      for (Index k = 0; k < view.d_s_corr.rows(); ++k) {
        view.d_s_clean.row(batch->corruption[static_cast<std::size_t>(k)]) += view.d_s_corr.row(k);
      }
      out.grads.theta += batch->sub_features.transpose() * view.d_s_clean;
    }
    out.grads.check_finite();
  }
  if (!std::isfinite(out.loss)) throw Error("contrastive: non-finite loss");
  return out;
}

}  // namespace

Matrix BatchSample::corrupted_features() const {
  Matrix out(sub_features.rows(), sub_features.cols());
  for (Index k = 0; k < out.rows(); ++k) {
    out.row(k) = sub_features.row(corruption[static_cast<std::size_t>(k)]);
  }
  return out;
}

void TrainConfig::validate() const {
  if (embed_dim < 1) throw ConfigError("train.embed_dim must be >= 1");
  if (sample_size < 1) throw ConfigError("train.sample_size must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
  if (bank.trainable_count() < 1) throw ConfigError("filter bank has no trainable filter");
  if (only_filter >= 0 && (only_filter >= bank.size() || bank.is_identity(only_filter)))
    throw ConfigError("train.only_filter must name a trainable filter");
}

BatchSample sample_batch(const GraphBundle& bundle, Index sample_size, Pcg64& rng) {
  const Index n = bundle.num_nodes();
  if (sample_size < 1 || sample_size > n)
    throw Error("sample_batch: sample size " + std::to_string(sample_size) + " outside [1, " +
                std::to_string(n) + "]");
  BatchSample b;
  b.node_ids = rng.sample_without_replacement(n, sample_size);

  std::vector<Index> position(static_cast<std::size_t>(n), -1);
  for (std::size_t k = 0; k < b.node_ids.size(); ++k) {
    position[static_cast<std::size_t>(b.node_ids[k])] = static_cast<Index>(k);
  }

  b.sub_features.resize(sample_size, bundle.features.cols());
  for (Index k = 0; k < sample_size; ++k) {
    b.sub_features.row(k) = bundle.features.row(b.node_ids[static_cast<std::size_t>(k)]);
  }

  const auto& adj = bundle.adjacency;
  std::vector<std::tuple<Index, Index, double>> triplets;
  for (Index k = 0; k < sample_size; ++k) {
    const Index i = b.node_ids[static_cast<std::size_t>(k)];
    for (Index p = adj.row_ptr[static_cast<std::size_t>(i)]; p < adj.row_ptr[static_cast<std::size_t>(i) + 1]; ++p) {
      const Index j_new = position[static_cast<std::size_t>(adj.col_idx[static_cast<std::size_t>(p)])];
      if (j_new >= 0) triplets.emplace_back(k, j_new, 1.0);
    }
  }
  b.sub_ops = FilterOperators::build(
      SparseMatrix::from_triplets(sample_size, sample_size, std::move(triplets)));

  b.corruption = rng.permutation(sample_size);
  return b;
}

double filter_loss(const EncoderState& state, const BatchSample& batch, const FilterHandle& filt) {
  if (filt.is_identity())
    throw Error("filter_loss: identity filter is excluded from training "
                "(positive and negative anchors coincide)");
  const auto proj = project_batch(state, batch);
  return forward_filter(state, filt, proj.s_clean, proj.s_corr).loss;
}

double jsd_estimate(const EncoderState& state, const BatchSample& batch, const FilterHandle& filt) {
  const auto proj = project_batch(state, batch);
  return forward_filter(state, filt, proj.s_clean, proj.s_corr).jsd;
}

double total_loss(const EncoderState& state, const std::vector<const BatchSample*>& per_filter,
                  const FilterBank& bank) {
  return run_filters(state, trainable_indices(bank), per_filter, bank, /*want_grads=*/false).loss;
}

BackwardResult backward(const EncoderState& state, const std::vector<const BatchSample*>& per_filter,
                        const FilterBank& bank) {
  auto r = run_filters(state, trainable_indices(bank), per_filter, bank, /*want_grads=*/true);
  return {r.loss, std::move(r.grads), std::move(r.per_filter_jsd)};
}

TrainResult train(const GraphBundle& bundle, const TrainConfig& config) {
  config.validate();
  const std::vector<int> filters =
      config.only_filter >= 0 ? std::vector<int>{config.only_filter} : trainable_indices(config.bank);

  Pcg64 init_rng(Pcg64::mix(config.seed, 0x11));
  Pcg64 sample_rng(Pcg64::mix(config.seed, 0x22));
  EncoderState state =
      EncoderState::init(bundle.feature_dim(), config.embed_dim, config.per_channel_slope, init_rng);

  TrainResult result;
  result.best_loss = std::numeric_limits<double>::infinity();
  result.state = state;
  int stale = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<BatchSample> batches;
    batches.reserve(static_cast<std::size_t>(config.batch_size));
    for (int b = 0; b < config.batch_size; ++b) {
      batches.push_back(sample_batch(bundle, config.sample_size, sample_rng));
    }

    std::vector<LossAndGrads> slots(batches.size());
    try {
      parallel_for(batches.size(), [&](std::size_t b) {
        const std::vector<const BatchSample*> per_filter(filters.size(), &batches[b]);
        slots[b] = run_filters(state, filters, per_filter, config.bank, /*want_grads=*/true);
      });
    } catch (const Error& e) {
      throw Error(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
    }

    // Fixed-order reduction across batches: summed gradients, mean loss.
    EncoderGrads grads = EncoderGrads::zeros_like(state);
    double loss = 0.0;
    std::vector<double> jsd(filters.size(), 0.0);
    for (const auto& slot : slots) {
      grads.accumulate(slot.grads);
      loss += slot.loss;
      for (std::size_t j = 0; j < jsd.size(); ++j) jsd[j] += slot.per_filter_jsd[j];
    }
    loss /= static_cast<double>(slots.size());
    for (auto& x : jsd) x /= static_cast<double>(slots.size());
    if (!std::isfinite(loss)) throw Error("train: loss diverged at epoch " + std::to_string(epoch));

    if (loss < result.best_loss) {
      result.best_loss = loss;
      result.best_epoch = epoch;
      result.state = state;
      stale = 0;
    } else {
      ++stale;
    }

    adam_update(state, grads, config.learning_rate);

    const auto t1 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss;
    rec.jsd = jsd;
    rec.wallclock_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    result.log.push_back(std::move(rec));

    if (stale >= config.patience) break;
  }
  result.rng_state = sample_rng.save();
  return result;
}

std::vector<TrainResult> train_independent(const GraphBundle& bundle, const TrainConfig& config) {
  config.validate();
  const auto filters = trainable_indices(config.bank);
  std::vector<TrainResult> results(filters.size());
  for (std::size_t j = 0; j < filters.size(); ++j) {
    TrainConfig c = config;
    c.only_filter = filters[j];
    c.seed = Pcg64::mix(config.seed, 0x9000 + static_cast<std::uint64_t>(filters[j]));
    results[j] = train(bundle, c);
  }
  return results;
}

std::vector<Matrix> embed_full(const EncoderState& state, const GraphBundle& bundle,
                               const FilterBank& bank) {
  if (bundle.feature_dim() != state.input_dim())
    throw Error("embed_full: bundle feature dim " + std::to_string(bundle.feature_dim()) +
                " != encoder input dim " + std::to_string(state.input_dim()));
  const FilterOperators ops = FilterOperators::build(bundle.adjacency);
  const Matrix projected = bundle.features * state.theta;
  std::vector<Matrix> out(static_cast<std::size_t>(bank.size()));
  parallel_for(out.size(), [&](std::size_t i) {
    const FilterHandle filt{&bank, &ops, static_cast<int>(i)};
    out[i] = prelu(apply_filter(filt, projected), state.prelu_slope);
  });
  return out;
}

std::vector<Matrix> embed_full_independent(const std::vector<EncoderState>& states,
                                           const GraphBundle& bundle, const FilterBank& bank) {
  const auto filters = trainable_indices(bank);
  if (states.size() != filters.size())
    throw Error("embed_full_independent: expected " + std::to_string(filters.size()) + " encoders, got " +
                std::to_string(states.size()));
  const FilterOperators ops = FilterOperators::build(bundle.adjacency);
  std::vector<Matrix> out(static_cast<std::size_t>(bank.size()));
  std::vector<const EncoderState*> encoder_for(static_cast<std::size_t>(bank.size()), &states.front());
  for (std::size_t j = 0; j < filters.size(); ++j) {
    encoder_for[static_cast<std::size_t>(filters[j])] = &states[j];
  }
  parallel_for(out.size(), [&](std::size_t i) {
    const EncoderState& enc = *encoder_for[i];
    const FilterHandle filt{&bank, &ops, static_cast<int>(i)};
    out[i] = prelu(apply_filter(filt, bundle.features * enc.theta), enc.prelu_slope);
  });
  return out;
}

}  // namespace specfil
