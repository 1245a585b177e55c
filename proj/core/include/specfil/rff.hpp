#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specfil/matrix.hpp"

namespace specfil {

/// Frozen random Fourier feature map z(x) = sqrt(2/D) cos(gamma x W + b),
/// W ~ N(0, I) entrywise and b ~ U[0, 2pi). Inner products of projected
/// points approximate the Gaussian kernel exp(-gamma^2 ||x - y||^2 / 2).
/// Reconstructible bit-exactly from (seed, in_dim, out_dim, gamma); the
/// random arrays are regenerated from the seed, never stored.
struct RffProjector {
  Matrix w;      // in_dim x out_dim
  Vector b;      // out_dim
  double gamma = 0.5;
  Index in_dim = 0;
  Index out_dim = 0;
  std::uint64_t seed = 0;

  static RffProjector make(Index in_dim, Index out_dim, double gamma, std::uint64_t seed);

  /// Row-wise projection; every output entry lies in [-sqrt(2/D), sqrt(2/D)].
  Matrix project(const Matrix& x) const;
};

/// JSON header carrying (seed, dims, gamma); the random arrays are
/// regenerated from the seed, never stored.
std::string rff_to_json(const RffProjector& p);
RffProjector rff_from_json(const std::string& text);

struct KernelErrorStats {
  Index out_dim = 0;
  double max_abs_err = 0.0;
  double mean_abs_err = 0.0;
};

/// Compares the empirical Gram matrix of projected points against the exact
/// Gaussian Gram matrix for each output dimension in `dims`.
std::vector<KernelErrorStats> kernel_error_report(const Matrix& points, double gamma,
                                                  std::uint64_t seed, const std::vector<Index>& dims);

}  // namespace specfil
