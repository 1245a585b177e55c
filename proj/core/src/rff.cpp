#include "specfil/rff.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <nlohmann/json.hpp>

#include "specfil/error.hpp"
#include "specfil/rng.hpp"

namespace specfil {

RffProjector RffProjector::make(Index in_dim, Index out_dim, double gamma, std::uint64_t seed) {
  if (in_dim < 1 || out_dim < 1) throw Error("rff: dimensions must be >= 1");
  if (!(gamma > 0.0)) throw Error("rff: gamma must be > 0");
  RffProjector p;
  p.in_dim = in_dim;
  p.out_dim = out_dim;
  p.gamma = gamma;
  p.seed = seed;
  Pcg64 rng(seed);
  p.w = Matrix::Zero(in_dim, out_dim);
  for (Index i = 0; i < in_dim; ++i) {
    for (Index j = 0; j < out_dim; ++j) p.w(i, j) = rng.next_normal();
  }
  p.b = Vector::Zero(out_dim);
  for (Index j = 0; j < out_dim; ++j) p.b(j) = rng.uniform(0.0, 2.0 * std::numbers::pi);
  return p;
}

Matrix RffProjector::project(const Matrix& x) const {
  if (x.cols() != in_dim)
    throw Error("rff: input dim " + std::to_string(x.cols()) + " != projector dim " + std::to_string(in_dim));
  if (!x.allFinite()) throw Error("rff: non-finite input");
  Matrix scaled = gamma * (x * w);
  scaled.rowwise() += b.transpose();
  const double scale = std::sqrt(2.0 / static_cast<double>(out_dim));
  return scale * scaled.array().cos().matrix();
}

std::string rff_to_json(const RffProjector& p) {
  nlohmann::json j = {{"seed", p.seed},
                      {"in_dim", p.in_dim},
                      {"out_dim", p.out_dim},
                      {"gamma", p.gamma}};
  return j.dump();
}

RffProjector rff_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error("rff: malformed projector header");
  for (const char* key : {"seed", "in_dim", "out_dim", "gamma"}) {
    if (!j.contains(key)) throw Error("rff: projector header missing '" + std::string(key) + "'");
  }
  return RffProjector::make(j.at("in_dim").get<Index>(), j.at("out_dim").get<Index>(),
                            j.at("gamma").get<double>(), j.at("seed").get<std::uint64_t>());
}

std::vector<KernelErrorStats> kernel_error_report(const Matrix& points, double gamma,
                                                  std::uint64_t seed, const std::vector<Index>& dims) {
  if (points.rows() < 2) throw Error("rff: kernel report needs at least 2 points");
  const Index n = points.rows();
  Matrix exact(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double d2 = (points.row(i) - points.row(j)).squaredNorm();
      exact(i, j) = std::exp(-gamma * gamma * d2 / 2.0);
    }
  }
  std::vector<KernelErrorStats> out;
  out.reserve(dims.size());
  for (const Index d : dims) {
    const auto proj = RffProjector::make(points.cols(), d, gamma, Pcg64::mix(seed, static_cast<std::uint64_t>(d)));
    const Matrix z = proj.project(points);
    const Matrix gram = z * z.transpose();
    KernelErrorStats s;
    s.out_dim = d;
    double acc = 0.0;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        const double err = std::abs(gram(i, j) - exact(i, j));
        s.max_abs_err = std::max(s.max_abs_err, err);
        acc += err;
      }
    }
    s.mean_abs_err = acc / static_cast<double>(n * n);
    out.push_back(s);
  }
  return out;
}

}  // namespace specfil
