#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specfil/bundle.hpp"
#include "specfil/contrastive.hpp"
#include "specfil/rff.hpp"

namespace specfil {

enum class CoeffActivation { None, Exp };

CoeffActivation coeff_activation_from_string(const std::string& s);
std::string to_string(CoeffActivation a);

/// Task head: per-filter combination coefficients with [0,1] masks plus a
/// multinomial logistic classifier. The effective weight of filter i is
/// act(alpha_i) * mask_i (mask applied after the activation).
struct CombineModel {
  Vector alphas;  // K, identity filter included
  Vector masks;   // K, clamped to [0, 1]
  CoeffActivation activation = CoeffActivation::None;
  Matrix classifier_w;  // D_eff x C
  Vector classifier_b;  // C

  Vector effective() const;

  static CombineModel init(Index num_filters, Index feature_dim, Index num_classes,
                           CoeffActivation activation);
};

/// Z = sum_i effective_i * lifted_i over all rows.
Matrix combine(const CombineModel& model, const std::vector<Matrix>& lifted);

/// Same, restricted to the given rows.
Matrix combine_rows(const CombineModel& model, const std::vector<Matrix>& lifted,
                    const std::vector<Index>& rows);

/// Argmax class predictions for the given rows. When `post_proj` is set the
/// combined low-dimensional rows pass through the frozen projection before
/// the classifier (rff.stage = post).
std::vector<int> predict(const CombineModel& model, const std::vector<Matrix>& lifted,
                         const std::vector<Index>& rows, const RffProjector* post_proj = nullptr);

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                const std::vector<Index>& rows);

struct HeadGrads {
  Vector alphas;
  Vector masks;
  Matrix classifier_w;
  Vector classifier_b;
};

/// Mean cross-entropy over the training rows plus (wd/2)||W||^2 on the
/// classifier weights only.
double head_loss(const CombineModel& model, const std::vector<Matrix>& lifted,
                 const std::vector<int>& labels, const std::vector<Index>& train_rows,
                 double weight_decay, const RffProjector* post_proj = nullptr);

/// Analytic gradients of head_loss w.r.t. alphas, masks, and the classifier.
HeadGrads head_gradients(const CombineModel& model, const std::vector<Matrix>& lifted,
                         const std::vector<int>& labels, const std::vector<Index>& train_rows,
                         double weight_decay, const RffProjector* post_proj = nullptr);

struct HeadConfig {
  double lr = 0.01;          // classifier learning rate
  double alpha_lr = 0.01;    // separate rate for alphas and masks
  double weight_decay = 0.0;  // classifier weights only
  CoeffActivation activation = CoeffActivation::None;
  int max_epochs = 10000;
  int patience = 200;  // epochs without validation improvement
};

struct FitResult {
  CombineModel model;  // snapshot of the best-validation epoch
  double best_val_acc = 0.0;
  int best_epoch = -1;
};

/// Full-batch Adam over (alphas, masks, classifier) with the two-rate scheme;
/// masks are projected back to [0,1] after each step. The returned model is
/// the epoch with the highest validation accuracy (training loss decides if
/// the validation set is empty). Deterministic: parameters start from fixed
/// values (alphas 1/K, masks 1, zero classifier).
FitResult fit_head(const std::vector<Matrix>& lifted, const std::vector<int>& labels,
                   int num_classes, const SplitSpec& split, const HeadConfig& config,
                   const RffProjector* post_proj = nullptr);

/// One point of the head hyperparameter space.
struct HeadTrial {
  double lr = 0.01;
  double alpha_lr = 0.01;
  double weight_decay = 0.0;
  CoeffActivation activation = CoeffActivation::None;
  double gamma = 0.0;  // 0 when RFF is disabled
};

struct SweepSettings {
  std::vector<double> lr_grid = {1e-5, 1e-4, 1e-3, 1.5e-3, 0.01, 0.015, 0.1, 0.5, 1.0, 2.0};
  std::vector<double> alpha_lr_grid = {1e-5, 1e-4, 1e-3, 1.5e-3, 0.01, 0.015, 0.1, 0.5, 1.0, 2.0};
  std::vector<double> wd_grid = {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 0.0, 0.5, 1.0, 3.0};
  std::vector<CoeffActivation> activation_grid = {CoeffActivation::None, CoeffActivation::Exp};
  std::vector<double> gamma_grid = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2};
  int budget = 60;
  std::uint64_t seed = 0;
  int max_epochs = 10000;
  int patience = 200;
};

/// Deterministic trial list: the full cartesian grid in axis order
/// (activation, lr, alpha_lr, weight_decay[, gamma]) when it fits the budget,
/// otherwise a seeded uniform subsample kept in grid order.
std::vector<HeadTrial> sweep_grid(const SweepSettings& space, int budget, std::uint64_t seed,
                                  bool include_gamma);

struct RffSettings {
  bool enabled = false;
  Index out_dim = 512;
  double gamma = 0.5;       // used when the sweep does not tune gamma
  bool post_stage = false;  // project after combination instead of per filter
  bool standardize = false;  // per-column standardization before projection
  std::uint64_t seed = 0;
};

struct SplitOutcome {
  double test_acc = 0.0;
  double val_acc = 0.0;
  int best_epoch = -1;
  Vector alphas, masks, effective;
  HeadTrial trial;
};

struct EvalReport {
  std::string dataset;
  std::string bank;
  Index raw_dim = 0;   // encoder output dimension
  Index head_dim = 0;  // dimension entering the classifier
  RffSettings rff;
  std::vector<SplitOutcome> splits;
  double mean_acc = 0.0;
  double std_acc = 0.0;  // population std across splits
  double embed_ms = 0.0;
  double lift_ms = 0.0;
  double sweep_ms = 0.0;
};

/// Per split: lift embeddings (optionally via RFF), sweep head trials on the
/// validation set, keep the best trial's test accuracy. Trials within a split
/// run in parallel; results reduce in trial order.
EvalReport evaluate_embeddings(const GraphBundle& bundle, const std::vector<Matrix>& embeddings,
                               const RffSettings& rff, const SweepSettings& sweep,
                               const std::string& dataset_name, const std::string& bank_desc);

/// embed_full + evaluate_embeddings.
EvalReport evaluate(const GraphBundle& bundle, const EncoderState& state, const FilterBank& bank,
                    const RffSettings& rff, const SweepSettings& sweep);

}  // namespace specfil
