#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "specfil/bundle.hpp"
#include "specfil/contrastive.hpp"
#include "specfil/error.hpp"

using namespace specfil;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Matrix dense_matrix_power(const Matrix& a, int p) {
  Matrix out = Matrix::Identity(a.rows(), a.cols());
  for (int k = 0; k < p; ++k) out = a * out;
  return out;
}

Matrix prelu_ref(const Matrix& z, double slope) {
  Matrix h = z;
  for (Index i = 0; i < h.rows(); ++i) {
    for (Index j = 0; j < h.cols(); ++j) {
      if (h(i, j) < 0.0) h(i, j) *= slope;
    }
  }
  return h;
}

// Hand-built batch over an explicit raw subgraph.
BatchSample make_batch(const SparseMatrix& raw_adj, const Matrix& features,
                       std::vector<Index> corruption) {
  BatchSample b;
  b.node_ids.resize(static_cast<std::size_t>(raw_adj.n_rows));
  for (Index i = 0; i < raw_adj.n_rows; ++i) b.node_ids[static_cast<std::size_t>(i)] = i;
  b.sub_features = features;
  b.sub_ops = FilterOperators::build(raw_adj);
  b.corruption = std::move(corruption);
  return b;
}

// Dense reference of the per-filter loss for the Gprgnn bank, computed in
// filter-first order (filter the raw features, then project) through dense powers of
// the oracle-normalized adjacency.
struct RefLoss {
  double loss;
  double jsd;
};

RefLoss reference_gpr_loss(const EncoderState& state, const SparseMatrix& raw_adj,
                           const Matrix& features, const std::vector<Index>& corruption,
                           int power) {
  const Matrix a_n = oracles::dense_normalized_adjacency(raw_adj.to_dense());
  const Matrix filter = dense_matrix_power(a_n, power);
  Matrix corrupted(features.rows(), features.cols());
  for (Index k = 0; k < features.rows(); ++k) {
    corrupted.row(k) = features.row(corruption[static_cast<std::size_t>(k)]);
  }
  const double slope = state.prelu_slope(0);
  const Matrix h = prelu_ref(filter * features * state.theta, slope);
  const Matrix h_corr = prelu_ref(filter * corrupted * state.theta, slope);
  Vector anchor = h.colwise().mean();
  for (Index j = 0; j < anchor.size(); ++j) anchor(j) = sigmoid(anchor(j));
  const Vector q = state.disc_w * anchor;
  double loss = 0.0, pos = 0.0, neg = 0.0;
  const auto n = static_cast<double>(h.rows());
  for (Index k = 0; k < h.rows(); ++k) {
    const double s = h.row(k).dot(q);
    const double s_corr = h_corr.row(k).dot(q);
    loss += -std::log(sigmoid(s)) - std::log(1.0 - sigmoid(s_corr));
    pos += -std::log1p(std::exp(-s));
    neg += std::log1p(std::exp(s_corr));
  }
  return {loss / (2.0 * n), pos / n - neg / n};
}

struct Instance {
  GraphBundle bundle;
  BatchSample batch;
  EncoderState state;
  FilterBank bank;
};

Instance random_instance(Pcg64& rng, Index n, Index d, Index d_prime, int order) {
  Instance inst;
  inst.bank = FilterBank::make(FilterKind::Gprgnn, order);
  const auto raw = oracles::random_graph(n, 0.4, rng);
  const Matrix x = oracles::random_matrix(n, d, rng);
  inst.batch = make_batch(raw, x, rng.permutation(n));
  inst.state = EncoderState::init(d, d_prime, false, rng);
  return inst;
}

// Pre-activation values must stay clear of the PReLU kink for central
// differences to be trustworthy.
bool clear_of_kinks(const Instance& inst, double margin = 1e-4) {
  const Matrix s = inst.batch.sub_features * inst.state.theta;
  Matrix s_corr(s.rows(), s.cols());
  for (Index k = 0; k < s.rows(); ++k) {
    s_corr.row(k) = s.row(inst.batch.corruption[static_cast<std::size_t>(k)]);
  }
  for (int i = 1; i < inst.bank.size(); ++i) {
    const FilterHandle f{&inst.bank, &inst.batch.sub_ops, i};
    if (apply_filter(f, s).cwiseAbs().minCoeff() < margin) return false;
    if (apply_filter(f, s_corr).cwiseAbs().minCoeff() < margin) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("contrastive") {

TEST_CASE("encode trivial cases") {
  Pcg64 rng(41);
  const auto bank = FilterBank::make(FilterKind::Gprgnn, 3);
  const auto raw = oracles::random_graph(5, 0.5, rng);
  const auto ops = FilterOperators::build(raw);
  const FilterHandle ident{&bank, &ops, 0};

  EncoderState state = EncoderState::init(4, 4, false, rng);
  state.theta = Matrix::Identity(4, 4);
  const Matrix nonneg = oracles::random_matrix(5, 4, rng).cwiseAbs();
  CHECK((encode(state, nonneg, ident) - nonneg).cwiseAbs().maxCoeff() == 0.0);
  CHECK(encode(state, Matrix::Zero(5, 4), ident).cwiseAbs().maxCoeff() == 0.0);

  // Forward pass against the dense reference (filter-first order).
  const EncoderState s2 = EncoderState::init(4, 3, false, rng);
  const Matrix x = oracles::random_matrix(5, 4, rng);
  const Matrix a_n = oracles::dense_normalized_adjacency(raw.to_dense());
  const FilterHandle hop{&bank, &ops, 1};
  const Matrix ref = prelu_ref(a_n * x * s2.theta, s2.prelu_slope(0));
  CHECK((encode(s2, x, hop) - ref).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("readout closed forms") {
  Matrix h(3, 2);
  h << 1.0, -2.0, 1.0, -2.0, 1.0, -2.0;
  const Vector r = readout(h);
  CHECK(r(0) == doctest::Approx(sigmoid(1.0)).epsilon(1e-15));
  CHECK(r(1) == doctest::Approx(sigmoid(-2.0)).epsilon(1e-15));

  const Vector zeros = readout(Matrix::Zero(4, 3));
  for (Index j = 0; j < 3; ++j) CHECK(zeros(j) == 0.5);

  Matrix two(2, 2);
  two << 2.0, 0.0, 0.0, 2.0;
  const Vector r2 = readout(two);
  CHECK(r2(0) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(r2(1) == doctest::Approx(0.7311).epsilon(1e-4));

  CHECK_THROWS_AS(readout(Matrix::Zero(0, 3)), Error);
}

TEST_CASE("discriminate closed forms") {
  Pcg64 rng(43);
  EncoderState state = EncoderState::init(3, 3, false, rng);
  Vector e1 = Vector::Zero(3);
  e1(0) = 1.0;

  state.disc_w = Matrix::Identity(3, 3);
  CHECK(discriminate(state, e1, e1) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(discriminate(state, Vector::Zero(3), e1) == 0.5);
  state.disc_w = Matrix::Zero(3, 3);
  CHECK(discriminate(state, e1, e1) == 0.5);
}

TEST_CASE("loss anchors at W = 0") {
  Pcg64 rng(47);
  auto inst = random_instance(rng, 10, 5, 4, 4);
  inst.state.disc_w = Matrix::Zero(4, 4);
  const FilterHandle f{&inst.bank, &inst.batch.sub_ops, 1};
  CHECK(filter_loss(inst.state, inst.batch, f) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(jsd_estimate(inst.state, inst.batch, f) ==
        doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("filter_loss is nonnegative on random instances") {
  Pcg64 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = random_instance(rng, 4 + static_cast<Index>(rng.next_below(12)), 3, 3, 4);
    for (int i = 1; i < inst.bank.size(); ++i) {
      CHECK(filter_loss(inst.state, inst.batch, {&inst.bank, &inst.batch.sub_ops, i}) >= 0.0);
    }
  }
}

TEST_CASE("identity filter is rejected during training") {
  Pcg64 rng(53);
  auto inst = random_instance(rng, 8, 4, 3, 3);
  const FilterHandle ident{&inst.bank, &inst.batch.sub_ops, 0};
  CHECK_THROWS_AS(filter_loss(inst.state, inst.batch, ident), Error);
}

TEST_CASE("loss and jsd match the dense reference") {
  Pcg64 rng(59);
  for (int trial = 0; trial < 5; ++trial) {
    const Index n = 5 + static_cast<Index>(rng.next_below(6));
    const auto raw = oracles::random_graph(n, 0.5, rng);
    const Matrix x = oracles::random_matrix(n, 4, rng);
    const auto perm = rng.permutation(n);
    const auto batch = make_batch(raw, x, perm);
    const auto state = EncoderState::init(4, 3, false, rng);
    const auto bank = FilterBank::make(FilterKind::Gprgnn, 4);
    for (int i = 1; i < bank.size(); ++i) {
      const FilterHandle f{&bank, &batch.sub_ops, i};
      const auto ref = reference_gpr_loss(state, raw, x, perm, i);
      CHECK(filter_loss(state, batch, f) == doctest::Approx(ref.loss).epsilon(1e-10));
      CHECK(jsd_estimate(state, batch, f) == doctest::Approx(ref.jsd).epsilon(1e-10));
    }
  }
}

TEST_CASE("total_loss is the mean over trainable filters") {
  Pcg64 rng(61);
  auto inst = random_instance(rng, 9, 4, 3, 4);
  std::vector<const BatchSample*> per_filter(3, &inst.batch);
  const double total = total_loss(inst.state, per_filter, inst.bank);
  double mean = 0.0;
  for (int i = 1; i < 4; ++i) {
    mean += filter_loss(inst.state, inst.batch, {&inst.bank, &inst.batch.sub_ops, i});
  }
  mean /= 3.0;
  CHECK(total == doctest::Approx(mean).epsilon(1e-14));

  SUBCASE("single trainable filter equals filter_loss") {
    const auto bank2 = FilterBank::make(FilterKind::Gprgnn, 2);
    std::vector<const BatchSample*> one(1, &inst.batch);
    CHECK(total_loss(inst.state, one, bank2) ==
          doctest::Approx(filter_loss(inst.state, inst.batch, {&bank2, &inst.batch.sub_ops, 1}))
              .epsilon(1e-15));
  }
  SUBCASE("identity-only bank is rejected") {
    const auto bank1 = FilterBank::make(FilterKind::Gprgnn, 1);
    std::vector<const BatchSample*> none;
    CHECK_THROWS_AS(total_loss(inst.state, none, bank1), Error);
  }
}

TEST_CASE("analytic gradients match central finite differences") {
  Pcg64 rng(67);
  int done = 0;
  while (done < 8) {
    auto inst = random_instance(rng, 5 + static_cast<Index>(rng.next_below(16)),
                                2 + static_cast<Index>(rng.next_below(7)),
                                1 + static_cast<Index>(rng.next_below(6)),
                                2 + static_cast<int>(rng.next_below(3)));
    if (!clear_of_kinks(inst)) continue;
    ++done;

    std::vector<const BatchSample*> per_filter(
        static_cast<std::size_t>(inst.bank.trainable_count()), &inst.batch);
    const auto result = backward(inst.state, per_filter, inst.bank);
    auto loss_fn = [&] { return total_loss(inst.state, per_filter, inst.bank); };

    double worst = 0.0;
    for (Index r = 0; r < inst.state.theta.rows(); ++r) {
      for (Index c = 0; c < inst.state.theta.cols(); ++c) {
        const double fd = oracles::central_difference(
            loss_fn, [&] { return inst.state.theta(r, c); },
            [&](double v) { inst.state.theta(r, c) = v; });
        worst = std::max(worst, oracles::grad_error(result.grads.theta(r, c), fd));
      }
    }
    for (Index r = 0; r < inst.state.disc_w.rows(); ++r) {
      for (Index c = 0; c < inst.state.disc_w.cols(); ++c) {
        const double fd = oracles::central_difference(
            loss_fn, [&] { return inst.state.disc_w(r, c); },
            [&](double v) { inst.state.disc_w(r, c) = v; });
        worst = std::max(worst, oracles::grad_error(result.grads.disc_w(r, c), fd));
      }
    }
    {
      const double fd = oracles::central_difference(
          loss_fn, [&] { return inst.state.prelu_slope(0); },
          [&](double v) { inst.state.prelu_slope(0) = v; });
      worst = std::max(worst, oracles::grad_error(result.grads.prelu_slope(0), fd));
    }
    CHECK(worst <= 1e-4);
  }

  SUBCASE("discriminator gradient at the symmetric point W = 0") {
    auto inst = random_instance(rng, 8, 4, 3, 3);
    inst.state.disc_w = Matrix::Zero(3, 3);
    std::vector<const BatchSample*> per_filter(2, &inst.batch);
    const auto result = backward(inst.state, per_filter, inst.bank);
    auto loss_fn = [&] { return total_loss(inst.state, per_filter, inst.bank); };
    for (Index r = 0; r < 3; ++r) {
      for (Index c = 0; c < 3; ++c) {
        const double fd = oracles::central_difference(
            loss_fn, [&] { return inst.state.disc_w(r, c); },
            [&](double v) { inst.state.disc_w(r, c) = v; });
        CHECK(oracles::grad_error(result.grads.disc_w(r, c), fd) <= 1e-5);
      }
    }
  }

  SUBCASE("zero features give zero theta gradient") {
    auto inst = random_instance(rng, 6, 3, 2, 3);
    inst.batch.sub_features = Matrix::Zero(6, 3);
    std::vector<const BatchSample*> per_filter(2, &inst.batch);
    const auto result = backward(inst.state, per_filter, inst.bank);
    CHECK(result.grads.theta.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("distinct batches per filter") {
    int done = 0;
    while (done < 2) {
      auto a = random_instance(rng, 9, 4, 3, 4);
      Instance b;
      b.bank = a.bank;
      b.batch = make_batch(oracles::random_graph(7, 0.5, rng), oracles::random_matrix(7, 4, rng),
                           rng.permutation(7));
      b.state = a.state;
      Instance c;
      c.bank = a.bank;
      c.batch = make_batch(oracles::random_graph(11, 0.3, rng), oracles::random_matrix(11, 4, rng),
                           rng.permutation(11));
      c.state = a.state;
      if (!clear_of_kinks(a) || !clear_of_kinks(b) || !clear_of_kinks(c)) continue;
      ++done;

      const std::vector<const BatchSample*> per_filter{&a.batch, &b.batch, &c.batch};
      const auto result = backward(a.state, per_filter, a.bank);
      auto loss_fn = [&] { return total_loss(a.state, per_filter, a.bank); };
      double worst = 0.0;
      for (Index r = 0; r < a.state.theta.rows(); ++r) {
        for (Index col = 0; col < a.state.theta.cols(); ++col) {
          const double fd = oracles::central_difference(
              loss_fn, [&] { return a.state.theta(r, col); },
              [&](double v) { a.state.theta(r, col) = v; });
          worst = std::max(worst, oracles::grad_error(result.grads.theta(r, col), fd));
        }
      }
      CHECK(worst <= 1e-4);
    }
  }

  SUBCASE("per-channel slope gradients") {
    int done = 0;
    while (done < 3) {
      Instance inst;
      inst.bank = FilterBank::make(FilterKind::Gprgnn, 3);
      const auto raw = oracles::random_graph(8, 0.4, rng);
      inst.batch = make_batch(raw, oracles::random_matrix(8, 4, rng), rng.permutation(8));
      inst.state = EncoderState::init(4, 3, /*per_channel_slope=*/true, rng);
      for (Index j = 0; j < 3; ++j) inst.state.prelu_slope(j) = rng.uniform(0.1, 0.5);
      if (!clear_of_kinks(inst)) continue;
      ++done;
      std::vector<const BatchSample*> per_filter(2, &inst.batch);
      const auto result = backward(inst.state, per_filter, inst.bank);
      auto loss_fn = [&] { return total_loss(inst.state, per_filter, inst.bank); };
      for (Index j = 0; j < 3; ++j) {
        const double fd = oracles::central_difference(
            loss_fn, [&] { return inst.state.prelu_slope(j); },
            [&](double v) { inst.state.prelu_slope(j) = v; });
        CHECK(oracles::grad_error(result.grads.prelu_slope(j), fd) <= 1e-4);
      }
    }
  }
}

TEST_CASE("sample_batch contracts") {
  const auto bundle = generate_csbm(24, 6, 3, 0.3, 0.05, 1.0, 5);

  SUBCASE("full-size sample is the identity relabeling") {
    Pcg64 rng(71);
    const auto batch = sample_batch(bundle, 24, rng);
    for (Index i = 0; i < 24; ++i) CHECK(batch.node_ids[static_cast<std::size_t>(i)] == i);
    const auto full = FilterOperators::build(bundle.adjacency);
    CHECK(batch.sub_adjacency().col_idx == full.adj_n.col_idx);
    CHECK(batch.sub_adjacency().values == full.adj_n.values);
  }

  SUBCASE("fixed seed reproduces the batch") {
    Pcg64 a(99), b(99);
    const auto s1 = sample_batch(bundle, 10, a);
    const auto s2 = sample_batch(bundle, 10, b);
    CHECK(s1.node_ids == s2.node_ids);
    CHECK(s1.corruption == s2.corruption);
    CHECK((s1.sub_features - s2.sub_features).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("induced degrees never exceed full-graph degrees") {
    Pcg64 rng(73);
    for (int trial = 0; trial < 10; ++trial) {
      const auto g = generate_csbm(20, 4, 2, 0.4, 0.2, 1.0, 100 + static_cast<std::uint64_t>(trial));
      const auto batch = sample_batch(g, 12, rng);
      const auto& sub = batch.sub_ops;
      for (Index k = 0; k < 12; ++k) {
        const Index orig = batch.node_ids[static_cast<std::size_t>(k)];
        const Index sub_deg = sub.adj_n.row_ptr[static_cast<std::size_t>(k) + 1] -
                              sub.adj_n.row_ptr[static_cast<std::size_t>(k)] - 1;  // minus self-loop
        const Index full_deg = g.adjacency.row_ptr[static_cast<std::size_t>(orig) + 1] -
                               g.adjacency.row_ptr[static_cast<std::size_t>(orig)];
        CHECK(sub_deg <= full_deg);
        // Every induced edge exists in the full graph.
        for (Index p = sub.adj_n.row_ptr[static_cast<std::size_t>(k)];
             p < sub.adj_n.row_ptr[static_cast<std::size_t>(k) + 1]; ++p) {
          const Index j = sub.adj_n.col_idx[static_cast<std::size_t>(p)];
          if (j == k) continue;
          CHECK(g.adjacency.at(orig, batch.node_ids[static_cast<std::size_t>(j)]) == 1.0);
        }
      }
    }
  }

  SUBCASE("corruption preserves the feature multiset exactly") {
    Pcg64 rng(79);
    const auto batch = sample_batch(bundle, 15, rng);
    const Matrix corrupted = batch.corrupted_features();
    std::vector<std::vector<double>> a, b;
    for (Index i = 0; i < 15; ++i) {
      a.emplace_back(batch.sub_features.row(i).data(),
                     batch.sub_features.row(i).data() + batch.sub_features.cols());
      b.emplace_back(corrupted.row(i).data(), corrupted.row(i).data() + corrupted.cols());
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }

  SUBCASE("oversized sample is rejected") {
    Pcg64 rng(83);
    CHECK_THROWS_AS(sample_batch(bundle, 25, rng), Error);
  }
}

TEST_CASE("training basics") {
  const auto bundle = generate_csbm(60, 8, 3, 0.3, 0.05, 1.0, 9);

  SUBCASE("zero learning rate leaves parameters unchanged") {
    TrainConfig cfg;
    cfg.embed_dim = 8;
    cfg.sample_size = 40;
    cfg.learning_rate = 0.0;
    cfg.max_epochs = 5;
    cfg.patience = 10;
    cfg.seed = 3;
    const auto result = train(bundle, cfg);
    Pcg64 init_rng(Pcg64::mix(3, 0x11));
    const auto fresh = EncoderState::init(8, 8, false, init_rng);
    CHECK((result.state.theta - fresh.theta).cwiseAbs().maxCoeff() == 0.0);
    CHECK((result.state.disc_w - fresh.disc_w).cwiseAbs().maxCoeff() == 0.0);
    CHECK(result.state.prelu_slope(0) == fresh.prelu_slope(0));

    // With frozen parameters the loss on any fixed batch stays constant.
    Pcg64 srng(5);
    const auto fixed = sample_batch(bundle, 40, srng);
    std::vector<const BatchSample*> per_filter(3, &fixed);
    const double before = total_loss(fresh, per_filter, cfg.bank);
    const double after = total_loss(result.state, per_filter, cfg.bank);
    CHECK(before == after);
  }

  SUBCASE("same seed twice gives bit-identical runs") {
    TrainConfig cfg;
    cfg.embed_dim = 6;
    cfg.sample_size = 30;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 12;
    cfg.patience = 12;
    cfg.seed = 17;
    const auto r1 = train(bundle, cfg);
    const auto r2 = train(bundle, cfg);
    CHECK((r1.state.theta - r2.state.theta).cwiseAbs().maxCoeff() == 0.0);
    CHECK((r1.state.disc_w - r2.state.disc_w).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(r1.log.size() == r2.log.size());
    for (std::size_t e = 0; e < r1.log.size(); ++e) {
      CHECK(r1.log[e].loss == r2.log[e].loss);
      CHECK(r1.log[e].jsd == r2.log[e].jsd);
    }
  }

  SUBCASE("separation drives loss toward 0 and jsd toward 0") {
    // At W = 0 the anchors are ln 2 and -2 ln 2; as the discriminator learns
    // to separate positives from negatives both move toward 0.
    const auto easy = generate_csbm(120, 12, 3, 0.25, 0.02, 1.5, 3);
    TrainConfig cfg;
    cfg.embed_dim = 16;
    cfg.sample_size = 80;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 600;
    cfg.patience = 600;
    cfg.seed = 11;
    const auto result = train(easy, cfg);
    CHECK(result.best_loss < 0.35);

    Pcg64 rng(5);
    const auto held_out = sample_batch(easy, 80, rng);
    for (int i = 1; i < cfg.bank.size(); ++i) {
      const FilterHandle f{&cfg.bank, &held_out.sub_ops, i};
      const double loss = filter_loss(result.state, held_out, f);
      const double jsd = jsd_estimate(result.state, held_out, f);
      CHECK(loss < 0.55);                      // below the ln 2 anchor
      CHECK(jsd > -1.0);                       // risen from -2 ln 2
      CHECK(jsd < 0.0);
    }
  }

  SUBCASE("loss decreases on an easy synthetic graph") {
    const auto easy = generate_csbm(300, 16, 3, 0.3, 0.02, 1.0, 21);
    TrainConfig cfg;
    cfg.embed_dim = 32;
    cfg.sample_size = 200;
    cfg.learning_rate = 0.01;
    cfg.max_epochs = 200;
    cfg.patience = 200;
    cfg.seed = 4;
    const auto result = train(easy, cfg);
    CHECK(result.best_loss < result.log.front().loss);
    CHECK(result.best_loss < 0.6);
  }
}

TEST_CASE("embed_full contracts") {
  const auto bundle = generate_csbm(30, 6, 2, 0.3, 0.1, 1.0, 13);
  Pcg64 rng(87);
  const auto bank = FilterBank::make(FilterKind::Gprgnn, 4);
  auto state = EncoderState::init(6, 5, false, rng);

  SUBCASE("identity filter embedding is prelu(X theta)") {
    const auto embeddings = embed_full(state, bundle, bank);
    REQUIRE(embeddings.size() == 4);
    const Matrix expect = prelu_ref(bundle.features * state.theta, state.prelu_slope(0));
    CHECK((embeddings[0] - expect).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("zero theta gives zero embeddings") {
    state.theta = Matrix::Zero(6, 5);
    for (const auto& e : embed_full(state, bundle, bank)) {
      CHECK(e.cwiseAbs().maxCoeff() == 0.0);
    }
  }

  SUBCASE("full-size batch encoding matches the full-graph embedding") {
    Pcg64 srng(91);
    const auto batch = sample_batch(bundle, 30, srng);
    const auto embeddings = embed_full(state, bundle, bank);
    for (int i = 0; i < bank.size(); ++i) {
      const FilterHandle f{&bank, &batch.sub_ops, i};
      const Matrix h = encode(state, batch.sub_features, f);
      CHECK((h - embeddings[static_cast<std::size_t>(i)]).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }

  SUBCASE("dimension mismatch is rejected") {
    const auto wrong = generate_csbm(10, 9, 2, 0.3, 0.1, 1.0, 14);
    CHECK_THROWS_AS(embed_full(state, wrong, bank), Error);
  }
}

TEST_CASE("independent encoders train one state per trainable filter") {
  const auto bundle = generate_csbm(40, 6, 2, 0.3, 0.05, 1.0, 23);
  TrainConfig cfg;
  cfg.embed_dim = 5;
  cfg.sample_size = 25;
  cfg.learning_rate = 0.01;
  cfg.max_epochs = 4;
  cfg.patience = 4;
  cfg.seed = 6;
  const auto results = train_independent(bundle, cfg);
  REQUIRE(results.size() == 3);
  // Different seeds per filter produce different weights.
  CHECK((results[0].state.theta - results[1].state.theta).cwiseAbs().maxCoeff() > 0.0);

  std::vector<EncoderState> states;
  for (const auto& r : results) states.push_back(r.state);
  const auto embeddings = embed_full_independent(states, bundle, cfg.bank);
  REQUIRE(embeddings.size() == 4);
  // The identity filter reuses the first trainable filter's encoder.
  const Matrix expect = prelu_ref(bundle.features * states[0].theta, states[0].prelu_slope(0));
  CHECK((embeddings[0] - expect).cwiseAbs().maxCoeff() == 0.0);

  std::vector<EncoderState> too_few(states.begin(), states.begin() + 2);
  CHECK_THROWS_AS(embed_full_independent(too_few, bundle, cfg.bank), Error);
}

TEST_CASE("encoder parameter count is independent of the bank size") {
  Pcg64 a(1), b(1);
  const auto s_small = EncoderState::init(7, 4, false, a);
  const auto s_large = EncoderState::init(7, 4, false, b);
  // Same shapes regardless of which bank the state later trains against.
  CHECK(s_small.theta.size() == s_large.theta.size());
  CHECK(s_small.disc_w.size() == s_large.disc_w.size());
  CHECK(s_small.prelu_slope.size() == 1);
}

TEST_CASE("non-finite parameters abort") {
  Pcg64 rng(93);
  auto state = EncoderState::init(4, 3, false, rng);
  state.theta(0, 0) = std::nan("");
  CHECK_THROWS_AS(state.check_finite(), Error);
}

}  // TEST_SUITE
