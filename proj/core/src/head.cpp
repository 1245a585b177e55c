#include "specfil/head.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "specfil/error.hpp"
#include "specfil/parallel.hpp"

namespace specfil {

CoeffActivation coeff_activation_from_string(const std::string& s) {
  if (s == "none") return CoeffActivation::None;
  if (s == "exp") return CoeffActivation::Exp;
  throw ConfigError("head.activation must be 'none' or 'exp', got '" + s + "'");
}

std::string to_string(CoeffActivation a) {
  return a == CoeffActivation::None ? "none" : "exp";
}

Vector CombineModel::effective() const {
  Vector act = alphas;
  if (activation == CoeffActivation::Exp) act = act.array().exp();
  return act.array() * masks.array();
}

CombineModel CombineModel::init(Index num_filters, Index feature_dim, Index num_classes,
                                CoeffActivation activation) {
  CombineModel m;
  m.alphas = Vector::Constant(num_filters, 1.0 / static_cast<double>(num_filters));
  m.masks = Vector::Ones(num_filters);
  m.activation = activation;
  m.classifier_w = Matrix::Zero(feature_dim, num_classes);
  m.classifier_b = Vector::Zero(num_classes);
  return m;
}

namespace {

void check_lifted(const std::vector<Matrix>& lifted) {
  if (lifted.empty()) throw Error("combine: no lifted embeddings");
  for (const auto& l : lifted) {
    if (l.rows() != lifted.front().rows() || l.cols() != lifted.front().cols())
      throw Error("combine: lifted embeddings have mismatched shapes");
  }
}

// Row-gathered copies of each lifted matrix, computed once per fit.
std::vector<Matrix> gather(const std::vector<Matrix>& lifted, const std::vector<Index>& rows) {
  std::vector<Matrix> out;
  out.reserve(lifted.size());
  for (const auto& l : lifted) {
    Matrix g(static_cast<Index>(rows.size()), l.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      g.row(static_cast<Index>(k)) = l.row(rows[k]);
    }
    out.push_back(std::move(g));
  }
  return out;
}

Matrix weighted_sum(const std::vector<Matrix>& parts, const Vector& weights) {
  Matrix z = weights(0) * parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) {
    z += weights(static_cast<Index>(i)) * parts[i];
  }
  return z;
}

// The frozen projection and its derivative cache for the post-combination
// mode: z = s cos(M), M = gamma C W + b.
struct PostForward {
  Matrix z;
  Matrix sin_m;  // sin(M), for the backward pass
};

PostForward post_forward(const RffProjector& p, const Matrix& c) {
  Matrix m = p.gamma * (c * p.w);
  m.rowwise() += p.b.transpose();
  PostForward f;
  const double scale = std::sqrt(2.0 / static_cast<double>(p.out_dim));
  f.z = scale * m.array().cos().matrix();
  f.sin_m = m.array().sin().matrix();
  return f;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits;
  for (Index r = 0; r < p.rows(); ++r) {
    const double mx = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - mx).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

Vector activation_value(const CombineModel& m) {
  Vector v = m.alphas;
  if (m.activation == CoeffActivation::Exp) v = v.array().exp();
  return v;
}

Vector activation_derivative(const CombineModel& m) {
  if (m.activation == CoeffActivation::Exp) return m.alphas.array().exp();
  return Vector::Ones(m.alphas.size());
}

}  // namespace

Matrix combine(const CombineModel& model, const std::vector<Matrix>& lifted) {
  check_lifted(lifted);
  if (static_cast<Index>(lifted.size()) != model.alphas.size())
    throw Error("combine: model has " + std::to_string(model.alphas.size()) + " coefficients for " +
                std::to_string(lifted.size()) + " embeddings");
  return weighted_sum(lifted, model.effective());
}

Matrix combine_rows(const CombineModel& model, const std::vector<Matrix>& lifted,
                    const std::vector<Index>& rows) {
  return combine(model, gather(lifted, rows));
}

std::vector<int> predict(const CombineModel& model, const std::vector<Matrix>& lifted,
                         const std::vector<Index>& rows, const RffProjector* post_proj) {
  Matrix x = combine_rows(model, lifted, rows);
  if (post_proj != nullptr) x = post_proj->project(x);
  const Matrix logits = (x * model.classifier_w).rowwise() + model.classifier_b.transpose();
  std::vector<int> pred(rows.size());
  for (Index r = 0; r < logits.rows(); ++r) {
    Index arg = 0;
    logits.row(r).maxCoeff(&arg);
    pred[static_cast<std::size_t>(r)] = static_cast<int>(arg);
  }
  return pred;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels,
                const std::vector<Index>& rows) {
  if (predictions.size() != rows.size()) throw Error("accuracy: prediction/row count mismatch");
  if (rows.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (predictions[k] == labels[static_cast<std::size_t>(rows[k])]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rows.size());
}

namespace {

struct HeadEval {
  double loss = 0.0;
  HeadGrads grads;
};

// Loss and (optionally) gradients over pre-gathered training rows.
HeadEval head_eval(const CombineModel& model, const std::vector<Matrix>& gathered,
                   const std::vector<int>& row_labels, double weight_decay,
                   const RffProjector* post_proj, bool want_grads) {
  const auto n = static_cast<Index>(row_labels.size());
  const Index num_filters = model.alphas.size();
  const Matrix c = weighted_sum(gathered, model.effective());

  PostForward post;
  const Matrix* x = &c;
  if (post_proj != nullptr) {
    post = post_forward(*post_proj, c);
    x = &post.z;
  }

  const Matrix logits = (*x * model.classifier_w).rowwise() + model.classifier_b.transpose();
  double ce = 0.0;
  for (Index r = 0; r < n; ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    ce += lse - logits(r, row_labels[static_cast<std::size_t>(r)]);
  }
  ce /= static_cast<double>(n);

  HeadEval out;
  out.loss = ce + 0.5 * weight_decay * model.classifier_w.squaredNorm();
  if (!want_grads) return out;

  Matrix g = softmax_rows(logits);
  for (Index r = 0; r < n; ++r) g(r, row_labels[static_cast<std::size_t>(r)]) -= 1.0;
  g /= static_cast<double>(n);

  out.grads.classifier_w = x->transpose() * g + weight_decay * model.classifier_w;
  out.grads.classifier_b = g.colwise().sum();

  Matrix dx = g * model.classifier_w.transpose();
  Matrix dc;
  if (post_proj != nullptr) {
    const double scale = std::sqrt(2.0 / static_cast<double>(post_proj->out_dim));
    const Matrix dm = (-scale) * dx.array() * post.sin_m.array();
    dc = post_proj->gamma * (dm * post_proj->w.transpose());
  } else {
    dc = std::move(dx);
  }

  Vector d_eff(num_filters);
  for (Index i = 0; i < num_filters; ++i) {
    d_eff(i) = (gathered[static_cast<std::size_t>(i)].array() * dc.array()).sum();
  }
  out.grads.alphas = d_eff.array() * model.masks.array() * activation_derivative(model).array();
  out.grads.masks = d_eff.array() * activation_value(model).array();
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<Index>& rows) {
  std::vector<int> out(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) out[k] = labels[static_cast<std::size_t>(rows[k])];
  return out;
}

}  // namespace

double head_loss(const CombineModel& model, const std::vector<Matrix>& lifted,
                 const std::vector<int>& labels, const std::vector<Index>& train_rows,
                 double weight_decay, const RffProjector* post_proj) {
  check_lifted(lifted);
  return head_eval(model, gather(lifted, train_rows), gather_labels(labels, train_rows),
                   weight_decay, post_proj, /*want_grads=*/false)
      .loss;
}

HeadGrads head_gradients(const CombineModel& model, const std::vector<Matrix>& lifted,
                         const std::vector<int>& labels, const std::vector<Index>& train_rows,
                         double weight_decay, const RffProjector* post_proj) {
  check_lifted(lifted);
  return head_eval(model, gather(lifted, train_rows), gather_labels(labels, train_rows),
                   weight_decay, post_proj, /*want_grads=*/true)
      .grads;
}

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEps = 1e-8;

template <typename T>
void adam_tensor(T& param, T& m, T& v, const T& grad, double lr, double bc1, double bc2) {
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v.array().matrix() + (1.0 - kBeta2) * grad.array().square().matrix();
  param.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps);
}

}  // namespace

FitResult fit_head(const std::vector<Matrix>& lifted, const std::vector<int>& labels,
                   int num_classes, const SplitSpec& split, const HeadConfig& config,
                   const RffProjector* post_proj) {
  check_lifted(lifted);
  if (split.train.empty()) throw Error("fit_head: empty training set");
  {
    std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
    for (Index r : split.train) {
      const int y = labels[static_cast<std::size_t>(r)];
      if (y < 0 || y >= num_classes) throw Error("fit_head: label out of range");
      seen[static_cast<std::size_t>(y)] = true;
    }
    for (int c = 0; c < num_classes; ++c) {
      if (!seen[static_cast<std::size_t>(c)])
        throw Error("fit_head: class " + std::to_string(c) + " absent from the training set");
    }
  }

  const Index head_dim = post_proj ? post_proj->out_dim : lifted.front().cols();
  CombineModel model = CombineModel::init(static_cast<Index>(lifted.size()), head_dim, num_classes,
                                          config.activation);

  const auto train_gathered = gather(lifted, split.train);
  const auto train_labels = gather_labels(labels, split.train);
  const auto val_gathered = gather(lifted, split.val);
  const bool use_val = !split.val.empty();

  Vector alpha_m = Vector::Zero(model.alphas.size()), alpha_v = Vector::Zero(model.alphas.size());
  Vector mask_m = Vector::Zero(model.masks.size()), mask_v = Vector::Zero(model.masks.size());
  Matrix w_m = Matrix::Zero(head_dim, num_classes), w_v = Matrix::Zero(head_dim, num_classes);
  Vector b_m = Vector::Zero(num_classes), b_v = Vector::Zero(num_classes);

  FitResult best;
  best.model = model;
  double best_metric = -std::numeric_limits<double>::infinity();
  int stale = 0;

  auto val_metric = [&](const HeadEval& eval) -> std::pair<double, double> {
    if (!use_val) return {-eval.loss, 0.0};
    Matrix x = weighted_sum(val_gathered, model.effective());
    if (post_proj != nullptr) x = post_forward(*post_proj, x).z;
    const Matrix logits = (x * model.classifier_w).rowwise() + model.classifier_b.transpose();
    std::size_t hits = 0;
    for (Index r = 0; r < logits.rows(); ++r) {
      Index arg = 0;
      logits.row(r).maxCoeff(&arg);
      if (static_cast<int>(arg) == labels[static_cast<std::size_t>(split.val[static_cast<std::size_t>(r)])]) ++hits;
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(logits.rows());
    return {acc, acc};
  };

  std::int64_t step = 0;
  for (int epoch = 0; epoch <= config.max_epochs; ++epoch) {
    const bool last = (epoch == config.max_epochs);
    const auto eval = head_eval(model, train_gathered, train_labels, config.weight_decay, post_proj,
                                /*want_grads=*/!last);
    if (!std::isfinite(eval.loss)) throw Error("fit_head: loss diverged at epoch " + std::to_string(epoch));

    const auto [metric, acc] = val_metric(eval);
    if (metric > best_metric) {
      best_metric = metric;
      best.model = model;
      best.best_val_acc = acc;
      best.best_epoch = epoch;
      stale = 0;
    } else {
      ++stale;
    }
    if (last || stale >= config.patience) break;

    ++step;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
    adam_tensor(model.classifier_w, w_m, w_v, eval.grads.classifier_w, config.lr, bc1, bc2);
    adam_tensor(model.classifier_b, b_m, b_v, eval.grads.classifier_b, config.lr, bc1, bc2);
    adam_tensor(model.alphas, alpha_m, alpha_v, eval.grads.alphas, config.alpha_lr, bc1, bc2);
    adam_tensor(model.masks, mask_m, mask_v, eval.grads.masks, config.alpha_lr, bc1, bc2);
    model.masks = model.masks.array().min(1.0).max(0.0);
  }
  return best;
}

std::vector<HeadTrial> sweep_grid(const SweepSettings& space, int budget, std::uint64_t seed,
                                  bool include_gamma) {
  if (space.lr_grid.empty() || space.alpha_lr_grid.empty() || space.wd_grid.empty() ||
      space.activation_grid.empty() || (include_gamma && space.gamma_grid.empty()))
    throw Error("sweep_grid: empty axis");
  if (budget < 1) throw Error("sweep_grid: budget must be >= 1");

  std::vector<HeadTrial> grid;
  for (const auto act : space.activation_grid) {
    for (const double lr : space.lr_grid) {
      for (const double alr : space.alpha_lr_grid) {
        for (const double wd : space.wd_grid) {
          if (include_gamma) {
            for (const double gamma : space.gamma_grid) {
              grid.push_back({lr, alr, wd, act, gamma});
            }
          } else {
            grid.push_back({lr, alr, wd, act, 0.0});
          }
        }
      }
    }
  }
  if (static_cast<int>(grid.size()) <= budget) return grid;

  // Seeded uniform subsample, kept in grid order.
  Pcg64 rng(Pcg64::mix(seed, 0x5eed));
  std::vector<std::size_t> picks(grid.size());
  std::iota(picks.begin(), picks.end(), 0);
  for (int i = 0; i < budget; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   static_cast<std::size_t>(rng.next_below(grid.size() - static_cast<std::size_t>(i)));
    std::swap(picks[static_cast<std::size_t>(i)], picks[j]);
  }
  picks.resize(static_cast<std::size_t>(budget));
  std::sort(picks.begin(), picks.end());
  std::vector<HeadTrial> out;
  out.reserve(picks.size());
  for (const auto p : picks) out.push_back(grid[p]);
  return out;
}

namespace {

std::vector<Matrix> standardize_columns(const std::vector<Matrix>& embeddings) {
  std::vector<Matrix> out;
  out.reserve(embeddings.size());
  for (const auto& e : embeddings) {
    Matrix s = e;
    for (Index j = 0; j < s.cols(); ++j) {
      const double mean = s.col(j).mean();
      const double var = (s.col(j).array() - mean).square().mean();
      const double sd = std::sqrt(var);
      s.col(j).array() -= mean;
      if (sd > 1e-12) s.col(j) /= sd;
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct Candidate {
  SplitOutcome outcome;
  bool valid = false;
};

}  // namespace

EvalReport evaluate_embeddings(const GraphBundle& bundle, const std::vector<Matrix>& embeddings,
                               const RffSettings& rff, const SweepSettings& sweep,
                               const std::string& dataset_name, const std::string& bank_desc) {
  check_lifted(embeddings);
  if (embeddings.front().rows() != bundle.num_nodes())
    throw Error("evaluate: embedding rows != node count");
  if (bundle.splits.empty()) throw Error("evaluate: bundle has no splits");

  EvalReport report;
  report.dataset = dataset_name;
  report.bank = bank_desc;
  report.raw_dim = embeddings.front().cols();
  report.head_dim = rff.enabled ? rff.out_dim : report.raw_dim;
  report.rff = rff;

  const auto trials = sweep_grid(sweep, sweep.budget, sweep.seed, rff.enabled);

  // Group trials by gamma so each lift happens once; group order follows
  // first appearance, and final selection uses the original trial order.
  std::vector<double> group_gamma;
  std::vector<std::vector<std::size_t>> group_trials;
  for (std::size_t t = 0; t < trials.size(); ++t) {
    const double g = rff.enabled ? trials[t].gamma : 0.0;
    std::size_t slot = group_gamma.size();
    for (std::size_t u = 0; u < group_gamma.size(); ++u) {
      if (group_gamma[u] == g) {
        slot = u;
        break;
      }
    }
    if (slot == group_gamma.size()) {
      group_gamma.push_back(g);
      group_trials.emplace_back();
    }
    group_trials[slot].push_back(t);
  }

  const std::vector<Matrix>* source = &embeddings;
  std::vector<Matrix> standardized;
  if (rff.enabled && rff.standardize) {
    standardized = standardize_columns(embeddings);
    source = &standardized;
  }

  std::vector<std::vector<Candidate>> candidates(bundle.splits.size(),
                                                 std::vector<Candidate>(trials.size()));

  for (std::size_t gidx = 0; gidx < group_gamma.size(); ++gidx) {
    const double gamma = group_gamma[gidx];

    const auto lift_start = std::chrono::steady_clock::now();
    std::vector<Matrix> lifted;
    RffProjector post_proj;
    const RffProjector* post_ptr = nullptr;
    if (!rff.enabled) {
      lifted = embeddings;
    } else if (rff.post_stage) {
      lifted = *source;
      post_proj = RffProjector::make(report.raw_dim, rff.out_dim, gamma, Pcg64::mix(rff.seed, 0xC0));
      post_ptr = &post_proj;
    } else {
      lifted.resize(source->size());
      parallel_for(source->size(), [&](std::size_t i) {
        const auto proj = RffProjector::make(report.raw_dim, rff.out_dim, gamma,
                                             Pcg64::mix(rff.seed, static_cast<std::uint64_t>(i)));
        lifted[i] = proj.project((*source)[i]);
      });
    }
    report.lift_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - lift_start).count();

    const auto sweep_start = std::chrono::steady_clock::now();
    for (std::size_t s = 0; s < bundle.splits.size(); ++s) {
      const auto& split = bundle.splits[s];
      const auto& group = group_trials[gidx];
      parallel_for(group.size(), [&](std::size_t k) {
        const std::size_t t = group[k];
        HeadConfig hc;
        hc.lr = trials[t].lr;
        hc.alpha_lr = trials[t].alpha_lr;
        hc.weight_decay = trials[t].weight_decay;
        hc.activation = trials[t].activation;
        hc.max_epochs = sweep.max_epochs;
        hc.patience = sweep.patience;
        const auto fit = fit_head(lifted, bundle.labels, bundle.num_classes, split, hc, post_ptr);
        Candidate c;
        c.valid = true;
        c.outcome.val_acc = fit.best_val_acc;
        c.outcome.best_epoch = fit.best_epoch;
        c.outcome.alphas = fit.model.alphas;
        c.outcome.masks = fit.model.masks;
        c.outcome.effective = fit.model.effective();
        c.outcome.trial = trials[t];
        c.outcome.test_acc =
            accuracy(predict(fit.model, lifted, split.test, post_ptr), bundle.labels, split.test);
        candidates[s][t] = std::move(c);
      });
    }
    report.sweep_ms += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - sweep_start).count();
  }

  double acc_sum = 0.0;
  for (std::size_t s = 0; s < bundle.splits.size(); ++s) {
    std::size_t best_t = 0;
    double best_val = -1.0;
    for (std::size_t t = 0; t < trials.size(); ++t) {
      if (!candidates[s][t].valid) throw Error("evaluate: missing trial result");
      if (candidates[s][t].outcome.val_acc > best_val) {
        best_val = candidates[s][t].outcome.val_acc;
        best_t = t;
      }
    }
    report.splits.push_back(candidates[s][best_t].outcome);
    acc_sum += candidates[s][best_t].outcome.test_acc;
  }
  report.mean_acc = acc_sum / static_cast<double>(report.splits.size());
  double var = 0.0;
  for (const auto& sp : report.splits) {
    var += (sp.test_acc - report.mean_acc) * (sp.test_acc - report.mean_acc);
  }
  report.std_acc = std::sqrt(var / static_cast<double>(report.splits.size()));
  return report;
}

EvalReport evaluate(const GraphBundle& bundle, const EncoderState& state, const FilterBank& bank,
                    const RffSettings& rff, const SweepSettings& sweep) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto embeddings = embed_full(state, bundle, bank);
  const auto t1 = std::chrono::steady_clock::now();
  auto report = evaluate_embeddings(bundle, embeddings, rff, sweep, bundle.name, bank.describe());
  report.embed_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return report;
}

}  // namespace specfil
