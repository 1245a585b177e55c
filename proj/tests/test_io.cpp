#include <random>
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "specfil/error.hpp"
#include "specfil/io.hpp"

using namespace specfil;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("specfil_io_" + std::to_string(Pcg64(std::random_device{}()).next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE("io") {

TEST_CASE("matrix files round-trip bitwise") {
  TempDir tmp;
  Pcg64 rng(3);
  const Matrix m = oracles::random_matrix(17, 9, rng);
  write_matrix(m, tmp.path / "m.bin");
  const Matrix back = read_matrix(tmp.path / "m.bin");
  CHECK(back.rows() == 17);
  CHECK(back.cols() == 9);
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("matrix reader rejects foreign and truncated files") {
  TempDir tmp;
  std::ofstream(tmp.path / "junk.bin") << "definitely not a matrix";
  CHECK_THROWS_AS(read_matrix(tmp.path / "junk.bin"), Error);
  CHECK_THROWS_AS(read_matrix(tmp.path / "missing.bin"), Error);

  Pcg64 rng(5);
  write_matrix(oracles::random_matrix(8, 8, rng), tmp.path / "m.bin");
  fs::resize_file(tmp.path / "m.bin", 64);
  CHECK_THROWS_AS(read_matrix(tmp.path / "m.bin"), Error);
}

TEST_CASE("checkpoints round-trip every field") {
  TempDir tmp;
  Pcg64 rng(7);
  Checkpoint ckpt;
  ckpt.bank = FilterBank::make(FilterKind::Bernstein, 5);
  ckpt.per_channel_slope = true;
  ckpt.independent_encoders = true;
  ckpt.states.push_back(EncoderState::init(6, 4, true, rng));
  ckpt.states.push_back(EncoderState::init(6, 4, true, rng));
  ckpt.states[0].adam_step = 42;
  ckpt.rng_state = rng.save();
  ckpt.best_epoch = 17;
  ckpt.best_loss = 0.321;
  ckpt.seed = 99;

  save_checkpoint(ckpt, tmp.path / "c.bin");
  const auto back = load_checkpoint(tmp.path / "c.bin");
  CHECK(back.bank.kind == FilterKind::Bernstein);
  CHECK(back.bank.order == 5);
  CHECK(back.per_channel_slope);
  CHECK(back.independent_encoders);
  REQUIRE(back.states.size() == 2);
  CHECK((back.states[0].theta - ckpt.states[0].theta).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.states[1].disc_w - ckpt.states[1].disc_w).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.states[0].theta_m - ckpt.states[0].theta_m).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.states[0].adam_step == 42);
  CHECK(back.states[0].prelu_slope.size() == 4);
  CHECK(back.rng_state.state_lo == ckpt.rng_state.state_lo);
  CHECK(back.rng_state.inc_hi == ckpt.rng_state.inc_hi);
  CHECK(back.best_epoch == 17);
  CHECK(back.best_loss == 0.321);
  CHECK(back.seed == 99);

  // A restored sampler continues the original stream.
  Pcg64 replay;
  replay.restore(back.rng_state);
  Pcg64 original;
  original.restore(ckpt.rng_state);
  for (int i = 0; i < 16; ++i) CHECK(replay.next_u64() == original.next_u64());
}

TEST_CASE("train logs round-trip") {
  TempDir tmp;
  std::vector<EpochRecord> log;
  for (int e = 0; e < 4; ++e) {
    log.push_back({e, 0.5 / (e + 1), {0.1 * e, -0.2 * e}, 12.5});
  }
  write_train_log(log, tmp.path / "log.jsonl");
  const auto back = read_train_log(tmp.path / "log.jsonl");
  REQUIRE(back.size() == 4);
  CHECK(back[2].epoch == 2);
  CHECK(back[2].loss == log[2].loss);
  CHECK(back[3].jsd == log[3].jsd);
}

}  // TEST_SUITE
