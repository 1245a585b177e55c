#include <benchmark/benchmark.h>

#include "specfil/bundle.hpp"
#include "specfil/contrastive.hpp"
#include "specfil/filter_bank.hpp"
#include "specfil/rff.hpp"
#include "specfil/rng.hpp"

namespace {

using namespace specfil;

const GraphBundle& bench_graph() {
  static const GraphBundle g = generate_csbm(2000, 64, 4, 0.02, 0.002, 1.0, 7);
  return g;
}

void BM_spmv(benchmark::State& state) {
  const auto& g = bench_graph();
  const auto ops = FilterOperators::build(g.adjacency);
  Pcg64 rng(1);
  Matrix x(g.num_nodes(), state.range(0));
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = rng.next_normal();
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(spmv(ops.adj_n, x));
  }
}
BENCHMARK(BM_spmv)->Arg(32)->Arg(128)->Arg(512);

void BM_filter_bank_pass(benchmark::State& state) {
  const auto& g = bench_graph();
  const auto ops = FilterOperators::build(g.adjacency);
  const auto bank = FilterBank::make(FilterKind::Gprgnn, 4);
  Pcg64 rng(2);
  Matrix x(g.num_nodes(), state.range(0));
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = rng.next_normal();
  }
  for (auto _ : state) {
    for (int i = 0; i < bank.size(); ++i) {
      benchmark::DoNotOptimize(apply_filter({&bank, &ops, i}, x));
    }
  }
}
BENCHMARK(BM_filter_bank_pass)->Arg(32)->Arg(512);

void BM_rff_project(benchmark::State& state) {
  Pcg64 rng(3);
  Matrix x(2000, 32);
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = rng.next_normal();
  }
  const auto proj = RffProjector::make(32, state.range(0), 0.5, 11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(proj.project(x));
  }
}
BENCHMARK(BM_rff_project)->Arg(512)->Arg(4096);

void BM_train_step(benchmark::State& state) {
  const auto& g = bench_graph();
  TrainConfig cfg;
  cfg.embed_dim = state.range(0);
  cfg.sample_size = 1000;
  cfg.batch_size = 2;
  cfg.max_epochs = 1;
  cfg.seed = 5;
  Pcg64 init_rng(9), sample_rng(10);
  const auto enc = EncoderState::init(g.feature_dim(), cfg.embed_dim, false, init_rng);
  const auto batch = sample_batch(g, cfg.sample_size, sample_rng);
  const std::vector<const BatchSample*> per_filter(
      static_cast<std::size_t>(cfg.bank.trainable_count()), &batch);
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward(enc, per_filter, cfg.bank));
  }
}
BENCHMARK(BM_train_step)->Arg(32)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
