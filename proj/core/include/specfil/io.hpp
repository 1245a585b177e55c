#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "specfil/contrastive.hpp"
#include "specfil/encoder.hpp"
#include "specfil/filter_bank.hpp"
#include "specfil/matrix.hpp"

namespace specfil {

/// Dense matrix container: magic "SPFMAT01", u32 version, u64 rows, u64 cols,
/// then rows*cols little-endian f64 in row-major order.
void write_matrix(const Matrix& m, const std::filesystem::path& file);
Matrix read_matrix(const std::filesystem::path& file);

/// Trained-run container: magic "SPFCKPT1", u32 version, bank description,
/// one or more encoder states (several when encoders are independent per
/// filter) with their Adam moments, the sampler PRNG state, and the best
/// epoch bookkeeping. All scalars little-endian, all arrays f64.
struct Checkpoint {
  FilterBank bank = FilterBank::make(FilterKind::Gprgnn, 4);
  bool per_channel_slope = false;
  bool independent_encoders = false;
  std::vector<EncoderState> states;
  Pcg64::State rng_state{};
  int best_epoch = -1;
  double best_loss = 0.0;
  std::uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file);
Checkpoint load_checkpoint(const std::filesystem::path& file);

/// One JSON object per epoch:
///   {"epoch": k, "loss": x, "jsd": [...], "wallclock_ms": t}
void write_train_log(const std::vector<EpochRecord>& log, const std::filesystem::path& file);
std::vector<EpochRecord> read_train_log(const std::filesystem::path& file);

}  // namespace specfil
