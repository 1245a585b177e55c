#include "specfil/io.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "specfil/error.hpp"

namespace specfil {

namespace {

constexpr char kMatrixMagic[8] = {'S', 'P', 'F', 'M', 'A', 'T', '0', '1'};
constexpr char kCheckpointMagic[8] = {'S', 'P', 'F', 'C', 'K', 'P', 'T', '1'};

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void get_bytes(std::istream& in, void* p, std::size_t n, const std::string& what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw Error("io: truncated " + what);
}

template <typename T>
void put_scalar(std::ostream& out, T v) {
  put_bytes(out, &v, sizeof(T));
}

template <typename T>
T get_scalar(std::istream& in, const std::string& what) {
  T v{};
  get_bytes(in, &v, sizeof(T), what);
  return v;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  put_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  put_bytes(out, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

Matrix get_matrix(std::istream& in, const std::string& what) {
  const auto rows = get_scalar<std::uint64_t>(in, what);
  const auto cols = get_scalar<std::uint64_t>(in, what);
  if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw Error("io: implausible shape in " + what);
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  get_bytes(in, m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), what);
  return m;
}

void put_vector(std::ostream& out, const Vector& v) {
  put_scalar<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  put_bytes(out, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

Vector get_vector(std::istream& in, const std::string& what) {
  const auto n = get_scalar<std::uint64_t>(in, what);
  if (n > (1ULL << 32)) throw Error("io: implausible vector size in " + what);
  Vector v(static_cast<Index>(n));
  get_bytes(in, v.data(), sizeof(double) * static_cast<std::size_t>(v.size()), what);
  return v;
}

std::ofstream open_out(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io: cannot open " + file.string() + " for writing");
  return out;
}

std::ifstream open_in(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("io: cannot open " + file.string());
  return in;
}

}  // namespace

void write_matrix(const Matrix& m, const std::filesystem::path& file) {
  auto out = open_out(file);
  put_bytes(out, kMatrixMagic, sizeof(kMatrixMagic));
  put_scalar<std::uint32_t>(out, 1);
  put_matrix(out, m);
  if (!out) throw Error("io: write failed for " + file.string());
}

Matrix read_matrix(const std::filesystem::path& file) {
  auto in = open_in(file);
  char magic[8];
  get_bytes(in, magic, sizeof(magic), file.string());
  if (std::memcmp(magic, kMatrixMagic, sizeof(magic)) != 0)
    throw Error("io: " + file.string() + " is not a matrix file");
  if (get_scalar<std::uint32_t>(in, file.string()) != 1)
    throw Error("io: unsupported matrix version in " + file.string());
  return get_matrix(in, file.string());
}

namespace {

void put_state(std::ostream& out, const EncoderState& s) {
  put_matrix(out, s.theta);
  put_vector(out, s.prelu_slope);
  put_matrix(out, s.disc_w);
  put_matrix(out, s.theta_m);
  put_matrix(out, s.theta_v);
  put_vector(out, s.slope_m);
  put_vector(out, s.slope_v);
  put_matrix(out, s.w_m);
  put_matrix(out, s.w_v);
  put_scalar<std::int64_t>(out, s.adam_step);
}

EncoderState get_state(std::istream& in, const std::string& what) {
  EncoderState s;
  s.theta = get_matrix(in, what);
  s.prelu_slope = get_vector(in, what);
  s.disc_w = get_matrix(in, what);
  s.theta_m = get_matrix(in, what);
  s.theta_v = get_matrix(in, what);
  s.slope_m = get_vector(in, what);
  s.slope_v = get_vector(in, what);
  s.w_m = get_matrix(in, what);
  s.w_v = get_matrix(in, what);
  s.adam_step = get_scalar<std::int64_t>(in, what);
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& file) {
  auto out = open_out(file);
  put_bytes(out, kCheckpointMagic, sizeof(kCheckpointMagic));
  put_scalar<std::uint32_t>(out, 1);
  put_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.bank.kind));
  put_scalar<std::int32_t>(out, ckpt.bank.order);
  put_scalar<std::uint8_t>(out, ckpt.per_channel_slope ? 1 : 0);
  put_scalar<std::uint8_t>(out, ckpt.independent_encoders ? 1 : 0);
  put_scalar<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.states.size()));
  for (const auto& s : ckpt.states) put_state(out, s);
  put_scalar<std::uint64_t>(out, ckpt.rng_state.state_hi);
  put_scalar<std::uint64_t>(out, ckpt.rng_state.state_lo);
  put_scalar<std::uint64_t>(out, ckpt.rng_state.inc_hi);
  put_scalar<std::uint64_t>(out, ckpt.rng_state.inc_lo);
  put_scalar<std::int32_t>(out, ckpt.best_epoch);
  put_scalar<double>(out, ckpt.best_loss);
  put_scalar<std::uint64_t>(out, ckpt.seed);
  if (!out) throw Error("io: write failed for " + file.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  auto in = open_in(file);
  char magic[8];
  get_bytes(in, magic, sizeof(magic), file.string());
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw Error("io: " + file.string() + " is not a checkpoint");
  if (get_scalar<std::uint32_t>(in, file.string()) != 1)
    throw Error("io: unsupported checkpoint version in " + file.string());
  Checkpoint c;
  const auto kind = get_scalar<std::uint32_t>(in, file.string());
  const auto order = get_scalar<std::int32_t>(in, file.string());
  if (kind > 2) throw Error("io: unknown filter kind in " + file.string());
  c.bank = FilterBank::make(static_cast<FilterKind>(kind), order);
  c.per_channel_slope = get_scalar<std::uint8_t>(in, file.string()) != 0;
  c.independent_encoders = get_scalar<std::uint8_t>(in, file.string()) != 0;
  const auto n_states = get_scalar<std::uint32_t>(in, file.string());
  if (n_states == 0 || n_states > 256) throw Error("io: implausible state count in " + file.string());
  for (std::uint32_t i = 0; i < n_states; ++i) c.states.push_back(get_state(in, file.string()));
  c.rng_state.state_hi = get_scalar<std::uint64_t>(in, file.string());
  c.rng_state.state_lo = get_scalar<std::uint64_t>(in, file.string());
  c.rng_state.inc_hi = get_scalar<std::uint64_t>(in, file.string());
  c.rng_state.inc_lo = get_scalar<std::uint64_t>(in, file.string());
  c.best_epoch = get_scalar<std::int32_t>(in, file.string());
  c.best_loss = get_scalar<double>(in, file.string());
  c.seed = get_scalar<std::uint64_t>(in, file.string());
  return c;
}

void write_train_log(const std::vector<EpochRecord>& log, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw Error("io: cannot open " + file.string() + " for writing");
  for (const auto& rec : log) {
    nlohmann::json j = {{"epoch", rec.epoch},
                        {"loss", rec.loss},
                        {"jsd", rec.jsd},
                        {"wallclock_ms", rec.wallclock_ms}};
    out << j.dump() << "\n";
  }
}

std::vector<EpochRecord> read_train_log(const std::filesystem::path& file) {
  auto in = open_in(file);
  std::vector<EpochRecord> log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    EpochRecord rec;
    rec.epoch = j.at("epoch").get<int>();
    rec.loss = j.at("loss").get<double>();
    rec.jsd = j.at("jsd").get<std::vector<double>>();
    rec.wallclock_ms = j.at("wallclock_ms").get<double>();
    log.push_back(std::move(rec));
  }
  return log;
}

}  // namespace specfil
